"""MedPPL surface syntax: lexer, AST, recursive-descent parser and renderer.

The language is the fixed subset a synthesized diagnosis model may use:
var bindings, function literals (plain or mem-wrapped), flip/categorical/
gaussian, top-level condition statements, a final return of a record of
queries, boolean/comparison/arithmetic operators, conditional expressions,
if/else-if chains with return, string/number/list literals and the
`.includes(x)` membership test. `Infer({...})` and `viz(...)` trailer lines
are recognized and discarded: inference budgets belong to the host, not the
program text. Anything else is UnsupportedConstruct.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import MedSyntaxError, UnknownIdentifier, UnsupportedConstruct

PRIMITIVES = ("flip", "categorical", "gaussian", "mem", "condition")
KEYWORDS = ("var", "function", "return", "if", "else", "true", "false")

# ---------------------------------------------------------------------------
# Tokens


@dataclass(frozen=True)
class Span:
    """Character-offset range [start, end) into Program.source, plus the
    1-based line/column of the start for error messages."""

    start: int
    end: int
    line: int
    col: int


_SPAN0 = Span(0, 0, 0, 0)


def _span_field():
    return field(default=_SPAN0, compare=False, repr=False)


@dataclass(frozen=True)
class Token:
    kind: str  # 'num' | 'str' | 'ident' | 'punct' | 'eof'
    text: str
    span: Span


_PUNCT2 = ("&&", "||", "==", "!=", "<=", ">=")
_PUNCT1 = "(){}[],:;?.!<>+-*/="


def tokenize(source: str) -> tuple[list[Token], list[tuple[Span, str]]]:
    """Returns (tokens, comments). Comments carry their span and text."""
    tokens: list[Token] = []
    comments: list[tuple[Span, str]] = []
    i, line, line_start = 0, 1, 0
    n = len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            line_start = i
            continue
        if c in " \t\r":
            i += 1
            continue
        col = i - line_start + 1
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j < 0 else j
            comments.append((Span(i, j, line, col), source[i:j]))
            i = j
            continue
        if source.startswith("/*", i):
            raise MedSyntaxError("block comments are not part of MedPPL", line, col, "// comment")
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if text.count(".") > 1:
                raise MedSyntaxError(f"malformed number '{text}'", line, col)
            tokens.append(Token("num", text, Span(i, j, line, col)))
            i = j
            continue
        if c in "'\"":
            j = i + 1
            while j < n and source[j] != c:
                if source[j] == "\n":
                    raise MedSyntaxError("unterminated string", line, col, c)
                if source[j] == "\\":
                    raise MedSyntaxError("escape sequences are not part of MedPPL", line, col)
                j += 1
            if j >= n:
                raise MedSyntaxError("unterminated string", line, col, c)
            tokens.append(Token("str", source[i + 1 : j], Span(i, j + 1, line, col)))
            i = j + 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(Token("ident", source[i:j], Span(i, j, line, col)))
            i = j
            continue
        two = source[i : i + 2]
        if two in _PUNCT2:
            tokens.append(Token("punct", two, Span(i, i + 2, line, col)))
            i += 2
            continue
        if two == "=>":
            raise UnsupportedConstruct("arrow function", line, col)
        if c in _PUNCT1:
            tokens.append(Token("punct", c, Span(i, i + 1, line, col)))
            i += 1
            continue
        raise MedSyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(Token("eof", "", Span(n, n, line, n - line_start + 1)))
    return tokens, comments


# ---------------------------------------------------------------------------
# AST: expressions


@dataclass(frozen=True)
class NumberLit:
    value: float
    span: Span = _span_field()


@dataclass(frozen=True)
class StringLit:
    value: str
    span: Span = _span_field()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = _span_field()


@dataclass(frozen=True)
class Ident:
    name: str
    span: Span = _span_field()


@dataclass(frozen=True)
class ListLit:
    items: tuple
    span: Span = _span_field()


@dataclass(frozen=True)
class RecordLit:
    entries: tuple  # of (key: str, Expr)
    span: Span = _span_field()


@dataclass(frozen=True)
class Call:
    callee: "Expr"
    args: tuple
    span: Span = _span_field()


@dataclass(frozen=True)
class Includes:
    receiver: "Expr"
    item: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class Unary:
    op: str  # '!' | '-'
    operand: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    span: Span = _span_field()


@dataclass(frozen=True)
class FunctionLit:
    params: tuple
    body: "Block"
    span: Span = _span_field()


Expr = (
    NumberLit | StringLit | BoolLit | Ident | ListLit | RecordLit | Call | Includes | Unary | Binary | Ternary | FunctionLit
)

# ---------------------------------------------------------------------------
# AST: statements inside function bodies


@dataclass(frozen=True)
class VarStmt:
    name: str
    value: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class ReturnStmt:
    value: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class IfStmt:
    cond: Expr
    then: "Block"
    orelse: "Block | IfStmt | None"
    span: Span = _span_field()


@dataclass(frozen=True)
class Block:
    stmts: tuple
    span: Span = _span_field()


Stmt = VarStmt | ReturnStmt | IfStmt

# ---------------------------------------------------------------------------
# AST: model top level


@dataclass(frozen=True)
class NamedFunction:
    name: str
    params: tuple
    body: Block
    memoized: bool
    span: Span = _span_field()


@dataclass(frozen=True)
class ValueBinding:
    name: str
    value: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class Condition:
    expr: Expr
    span: Span = _span_field()


@dataclass(frozen=True)
class QueryReturn:
    record: RecordLit
    span: Span = _span_field()


TopStmt = NamedFunction | ValueBinding | Condition | QueryReturn


@dataclass(frozen=True)
class Program:
    """A parsed MedPPL model. Immutable; safe to share across threads.

    body holds the model statements in source order (definitions and
    conditions interleave; the query return is always last). definitions,
    conditions and query_record are derived views in that same order.
    """

    body: tuple
    source: str = field(default="", compare=False, repr=False)
    comments: tuple = field(default=(), compare=False, repr=False)

    @property
    def definitions(self) -> tuple:
        return tuple(s for s in self.body if isinstance(s, (NamedFunction, ValueBinding)))

    @property
    def conditions(self) -> tuple:
        return tuple(s for s in self.body if isinstance(s, Condition))

    @property
    def query_return(self) -> QueryReturn:
        return self.body[-1]

    @property
    def query_record(self) -> dict:
        return {k: e for k, e in self.query_return.record.entries}

    @property
    def query_names(self) -> tuple:
        return tuple(k for k, _ in self.query_return.record.entries)

    def span_index(self) -> dict:
        """Map from AST node id to source span (includes comments)."""
        index = {}

        def visit(node):
            index[id(node)] = node.span
            for child in _children(node):
                visit(child)

        for stmt in self.body:
            visit(stmt)
        return index

    def number_literals(self) -> list[NumberLit]:
        """Every numeric literal in the model, in source order (edit targets)."""
        out: list[NumberLit] = []

        def visit(node):
            if isinstance(node, NumberLit):
                out.append(node)
            for child in _children(node):
                visit(child)

        for stmt in self.body:
            visit(stmt)
        out.sort(key=lambda n: n.span.start)
        return out


def _children(node):
    if isinstance(node, (NumberLit, StringLit, BoolLit, Ident)):
        return ()
    if isinstance(node, ListLit):
        return node.items
    if isinstance(node, RecordLit):
        return tuple(e for _, e in node.entries)
    if isinstance(node, Call):
        return (node.callee, *node.args)
    if isinstance(node, Includes):
        return (node.receiver, node.item)
    if isinstance(node, Unary):
        return (node.operand,)
    if isinstance(node, Binary):
        return (node.left, node.right)
    if isinstance(node, Ternary):
        return (node.cond, node.then, node.other)
    if isinstance(node, FunctionLit):
        return (node.body,)
    if isinstance(node, VarStmt):
        return (node.value,)
    if isinstance(node, ReturnStmt):
        return (node.value,)
    if isinstance(node, IfStmt):
        return (node.cond, node.then) + ((node.orelse,) if node.orelse is not None else ())
    if isinstance(node, Block):
        return node.stmts
    if isinstance(node, _CondInBlock):
        return (node.expr,)
    if isinstance(node, NamedFunction):
        return (node.body,)
    if isinstance(node, ValueBinding):
        return (node.value,)
    if isinstance(node, Condition):
        return (node.expr,)
    if isinstance(node, QueryReturn):
        return (node.record,)
    raise TypeError(f"not an AST node: {node!r}")


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens, self.comments = tokenize(source)
        self.pos = 0

    # -- token plumbing ------------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def at(self, text: str, kind: str = "punct") -> bool:
        tok = self.peek()
        return tok.kind == kind and tok.text == text

    def at_ident(self, text: str) -> bool:
        return self.at(text, kind="ident")

    def expect(self, text: str, kind: str = "punct") -> Token:
        tok = self.peek()
        if tok.kind != kind or tok.text != text:
            got = tok.text or "end of input"
            raise MedSyntaxError(f"unexpected '{got}'", tok.span.line, tok.span.col, repr(text))
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in KEYWORDS:
            got = tok.text or "end of input"
            raise MedSyntaxError(f"unexpected '{got}'", tok.span.line, tok.span.col, "an identifier")
        return self.next()

    def skip_semis(self):
        while self.at(";"):
            self.next()

    def span_from(self, start: Span) -> Span:
        end = self.tokens[self.pos - 1].span.end if self.pos > 0 else start.end
        return Span(start.start, end, start.line, start.col)

    # -- top level -----------------------------------------------------------

    def parse_program(self) -> Program:
        stmts = []
        self.skip_semis()
        while not self.at("", kind="eof"):
            stmts.append(self.parse_top_stmt())
            self.skip_semis()
        body = self._assemble_model(stmts)
        program = Program(body=tuple(body), source=self.source, comments=tuple(self.comments))
        _resolve_names(program)
        return program

    def parse_top_stmt(self):
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "var":
            return self.parse_var_top()
        if tok.kind == "ident" and tok.text == "condition":
            return self.parse_condition()
        if tok.kind == "ident" and tok.text == "return":
            start = self.next().span
            value = self.parse_expr()
            if not isinstance(value, RecordLit):
                raise UnsupportedConstruct(
                    "model must return a record of queries", start.line, start.col
                )
            return QueryReturn(record=value, span=self.span_from(start))
        if tok.kind == "ident" and tok.text == "viz":
            start = self.next().span
            self.expect("(")
            self.parse_expr()
            while self.at(","):
                self.next()
                self.parse_expr()
            self.expect(")")
            return _Discard(span=self.span_from(start))
        raise MedSyntaxError(
            f"unexpected '{tok.text or 'end of input'}' at top level",
            tok.span.line,
            tok.span.col,
            "'var', 'condition' or 'return'",
        )

    def parse_var_top(self):
        start = self.expect("var", kind="ident").span
        name_tok = self.expect_ident()
        name = name_tok.text
        self.expect("=")
        if name in PRIMITIVES:
            raise UnsupportedConstruct(
                f"rebinding the primitive '{name}'", name_tok.span.line, name_tok.span.col
            )
        # `var x = Infer(...)` is an inference directive; parse and discard.
        if self.at_ident("Infer"):
            self.next()
            self.expect("(")
            self.parse_expr()
            self.expect(")")
            return _Discard(span=self.span_from(start))
        value = self.parse_expr()
        span = self.span_from(start)
        return self._binding_from(name, value, span)

    def _binding_from(self, name, value, span):
        if isinstance(value, FunctionLit):
            return NamedFunction(name=name, params=value.params, body=value.body, memoized=False, span=span)
        if (
            isinstance(value, Call)
            and isinstance(value.callee, Ident)
            and value.callee.name == "mem"
            and len(value.args) == 1
            and isinstance(value.args[0], FunctionLit)
        ):
            fn = value.args[0]
            return NamedFunction(name=name, params=fn.params, body=fn.body, memoized=True, span=span)
        return ValueBinding(name=name, value=value, span=span)

    def parse_condition(self) -> Condition:
        start = self.expect("condition", kind="ident").span
        self.expect("(")
        expr = self.parse_expr()
        self.expect(")")
        return Condition(expr=expr, span=self.span_from(start))

    def _assemble_model(self, stmts) -> list:
        stmts = [s for s in stmts if not isinstance(s, _Discard)]
        if not stmts:
            raise MedSyntaxError("empty program", 1, 1, "a model body")
        has_return = any(isinstance(s, QueryReturn) for s in stmts)
        if not has_return:
            # Wrapped form: a single zero-parameter function holds the model.
            wrappers = [
                s
                for s in stmts
                if isinstance(s, NamedFunction) and not s.params and _block_plain_return_record(s.body)
            ]
            others = [s for s in stmts if s not in wrappers]
            if len(wrappers) == 1 and not others:
                return self._unwrap(wrappers[0])
            raise MedSyntaxError(
                "program has no query return (neither a bare model body nor a "
                "single model function wrapper)",
                1,
                1,
                "return {query1: ...}",
            )
        body = list(stmts)
        ret_positions = [i for i, s in enumerate(body) if isinstance(s, QueryReturn)]
        if len(ret_positions) > 1:
            s = body[ret_positions[1]]
            raise UnsupportedConstruct("multiple top-level returns", s.span.line, s.span.col)
        if ret_positions[0] != len(body) - 1:
            s = body[ret_positions[0] + 1]
            raise UnsupportedConstruct("statements after the query return", s.span.line, s.span.col)
        if not body[-1].record.entries:
            s = body[-1]
            raise UnsupportedConstruct("empty query record", s.span.line, s.span.col)
        return body

    def _unwrap(self, wrapper: NamedFunction) -> list:
        body: list = []
        for stmt in wrapper.body.stmts:
            if isinstance(stmt, VarStmt):
                body.append(self._binding_from(stmt.name, stmt.value, stmt.span))
            elif isinstance(stmt, _CondInBlock):
                body.append(Condition(expr=stmt.expr, span=stmt.span))
            elif isinstance(stmt, ReturnStmt):
                if not isinstance(stmt.value, RecordLit):
                    raise UnsupportedConstruct(
                        "model must return a record of queries", stmt.span.line, stmt.span.col
                    )
                body.append(QueryReturn(record=stmt.value, span=stmt.span))
            else:
                raise UnsupportedConstruct(
                    "only var/condition/return are allowed at the model top level",
                    stmt.span.line,
                    stmt.span.col,
                )
        return self._assemble_model(body)

    # -- statements ----------------------------------------------------------

    def parse_block(self, top_of_function: bool) -> Block:
        start = self.expect("{").span
        stmts = []
        self.skip_semis()
        while not self.at("}"):
            stmts.append(self.parse_stmt(top_of_function))
            self.skip_semis()
        self.expect("}")
        return Block(stmts=tuple(stmts), span=self.span_from(start))

    def parse_stmt(self, top_of_function: bool):
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "var":
            start = self.next().span
            name_tok = self.expect_ident()
            if name_tok.text in PRIMITIVES:
                raise UnsupportedConstruct(
                    f"rebinding the primitive '{name_tok.text}'",
                    name_tok.span.line,
                    name_tok.span.col,
                )
            self.expect("=")
            value = self.parse_expr()
            return VarStmt(name=name_tok.text, value=value, span=self.span_from(start))
        if tok.kind == "ident" and tok.text == "return":
            start = self.next().span
            value = self.parse_expr()
            return ReturnStmt(value=value, span=self.span_from(start))
        if tok.kind == "ident" and tok.text == "if":
            return self.parse_if(top_of_function)
        if tok.kind == "ident" and tok.text == "condition":
            if not top_of_function:
                raise UnsupportedConstruct(
                    "condition inside a nested block (conditions belong at the model top level)",
                    tok.span.line,
                    tok.span.col,
                )
            cond = self.parse_condition()
            return _CondInBlock(expr=cond.expr, span=cond.span)
        raise MedSyntaxError(
            f"unexpected '{tok.text or 'end of input'}' in block",
            tok.span.line,
            tok.span.col,
            "'var', 'return' or 'if'",
        )

    def parse_if(self, top_of_function: bool) -> IfStmt:
        start = self.expect("if", kind="ident").span
        self.expect("(")
        cond = self.parse_expr()
        self.expect(")")
        then = self.parse_block(top_of_function=False)
        orelse = None
        if self.at_ident("else"):
            self.next()
            if self.at_ident("if"):
                orelse = self.parse_if(top_of_function=False)
            else:
                orelse = self.parse_block(top_of_function=False)
        return IfStmt(cond=cond, then=then, orelse=orelse, span=self.span_from(start))

    # -- expressions ---------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self.parse_ternary()

    def parse_ternary(self) -> Expr:
        start = self.peek().span
        cond = self.parse_or()
        if self.at("?"):
            self.next()
            then = self.parse_ternary()
            self.expect(":")
            other = self.parse_ternary()
            return Ternary(cond=cond, then=then, other=other, span=self.span_from(start))
        return cond

    def parse_or(self) -> Expr:
        start = self.peek().span
        left = self.parse_and()
        while self.at("||"):
            self.next()
            right = self.parse_and()
            left = Binary(op="||", left=left, right=right, span=self.span_from(start))
        return left

    def parse_and(self) -> Expr:
        start = self.peek().span
        left = self.parse_equality()
        while self.at("&&"):
            self.next()
            right = self.parse_equality()
            left = Binary(op="&&", left=left, right=right, span=self.span_from(start))
        return left

    def parse_equality(self) -> Expr:
        start = self.peek().span
        left = self.parse_relational()
        while self.at("==") or self.at("!="):
            op = self.next().text
            right = self.parse_relational()
            left = Binary(op=op, left=left, right=right, span=self.span_from(start))
        return left

    def parse_relational(self) -> Expr:
        start = self.peek().span
        left = self.parse_additive()
        while self.at("<") or self.at("<=") or self.at(">") or self.at(">="):
            op = self.next().text
            right = self.parse_additive()
            left = Binary(op=op, left=left, right=right, span=self.span_from(start))
        return left

    def parse_additive(self) -> Expr:
        start = self.peek().span
        left = self.parse_multiplicative()
        while self.at("+") or self.at("-"):
            op = self.next().text
            right = self.parse_multiplicative()
            left = Binary(op=op, left=left, right=right, span=self.span_from(start))
        return left

    def parse_multiplicative(self) -> Expr:
        start = self.peek().span
        left = self.parse_unary()
        while self.at("*") or self.at("/"):
            op = self.next().text
            right = self.parse_unary()
            left = Binary(op=op, left=left, right=right, span=self.span_from(start))
        return left

    def parse_unary(self) -> Expr:
        tok = self.peek()
        if self.at("!") or self.at("-"):
            self.next()
            operand = self.parse_unary()
            return Unary(op=tok.text, operand=operand, span=Span(tok.span.start, operand.span.end, tok.span.line, tok.span.col))
        return self.parse_postfix()

    def parse_postfix(self) -> Expr:
        start = self.peek().span
        expr = self.parse_primary()
        while True:
            if self.at("("):
                self.next()
                args = []
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.at(","):
                        self.next()
                        args.append(self.parse_expr())
                self.expect(")")
                expr = Call(callee=expr, args=tuple(args), span=self.span_from(start))
            elif self.at("."):
                dot = self.next()
                method = self.expect_ident()
                if method.text != "includes":
                    raise UnsupportedConstruct(
                        f"method '.{method.text}' (only .includes is supported)",
                        dot.span.line,
                        dot.span.col,
                    )
                self.expect("(")
                item = self.parse_expr()
                self.expect(")")
                expr = Includes(receiver=expr, item=item, span=self.span_from(start))
            else:
                return expr

    def parse_primary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.next()
            return NumberLit(value=float(tok.text), span=tok.span)
        if tok.kind == "str":
            self.next()
            return StringLit(value=tok.text, span=tok.span)
        if tok.kind == "ident":
            if tok.text == "true" or tok.text == "false":
                self.next()
                return BoolLit(value=tok.text == "true", span=tok.span)
            if tok.text == "function":
                return self.parse_function_lit()
            if tok.text in ("var", "return", "if", "else"):
                raise MedSyntaxError(
                    f"unexpected keyword '{tok.text}' in expression", tok.span.line, tok.span.col
                )
            self.next()
            return Ident(name=tok.text, span=tok.span)
        if self.at("("):
            self.next()
            expr = self.parse_expr()
            self.expect(")")
            return expr
        if self.at("["):
            start = self.next().span
            items = []
            if not self.at("]"):
                items.append(self.parse_expr())
                while self.at(","):
                    self.next()
                    if self.at("]"):
                        break
                    items.append(self.parse_expr())
            self.expect("]")
            return ListLit(items=tuple(items), span=self.span_from(start))
        if self.at("{"):
            return self.parse_record_lit()
        raise MedSyntaxError(
            f"unexpected '{tok.text or 'end of input'}'", tok.span.line, tok.span.col, "an expression"
        )

    def parse_record_lit(self) -> RecordLit:
        start = self.expect("{").span
        entries = []
        seen = set()
        if not self.at("}"):
            while True:
                key_tok = self.peek()
                if key_tok.kind == "str":
                    self.next()
                    key = key_tok.text
                elif key_tok.kind == "ident":
                    self.next()
                    key = key_tok.text
                else:
                    raise MedSyntaxError(
                        "record keys must be identifiers or strings",
                        key_tok.span.line,
                        key_tok.span.col,
                    )
                if key in seen:
                    raise MedSyntaxError(
                        f"duplicate record key '{key}'", key_tok.span.line, key_tok.span.col
                    )
                seen.add(key)
                self.expect(":")
                entries.append((key, self.parse_expr()))
                if self.at(","):
                    self.next()
                    if self.at("}"):
                        break
                    continue
                break
        self.expect("}")
        return RecordLit(entries=tuple(entries), span=self.span_from(start))

    def parse_function_lit(self) -> FunctionLit:
        start = self.expect("function", kind="ident").span
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.expect_ident().text)
            while self.at(","):
                self.next()
                params.append(self.expect_ident().text)
        self.expect(")")
        body = self.parse_block(top_of_function=True)
        return FunctionLit(params=tuple(params), body=body, span=self.span_from(start))


@dataclass(frozen=True)
class _Discard:
    """Parsed-and-dropped trailer (Infer/viz)."""

    span: Span = _span_field()


@dataclass(frozen=True)
class _CondInBlock:
    """condition(...) inside a model-wrapper function body, lifted to a
    top-level Condition during unwrapping."""

    expr: Expr
    span: Span = _span_field()


def _block_plain_return_record(block: Block) -> bool:
    return any(
        isinstance(s, ReturnStmt) and isinstance(s.value, RecordLit) for s in block.stmts
    )


# ---------------------------------------------------------------------------
# Name resolution (enforced at parse time: a Program never holds unresolved
# names, per the Program invariant)


def _resolve_names(program: Program) -> None:
    top_names = {d.name for d in program.definitions}

    def resolve_expr(node, scope: set):
        if isinstance(node, Ident):
            if node.name in PRIMITIVES:
                raise UnsupportedConstruct(
                    f"primitive '{node.name}' used as a value (it may only be called)",
                    node.span.line,
                    node.span.col,
                )
            if node.name not in scope and node.name not in top_names:
                raise UnknownIdentifier(node.name, node.span.line, node.span.col)
            return
        if isinstance(node, Call) and isinstance(node.callee, Ident):
            callee = node.callee
            if callee.name not in PRIMITIVES and callee.name not in scope and callee.name not in top_names:
                raise UnknownIdentifier(callee.name, callee.span.line, callee.span.col)
            for a in node.args:
                resolve_expr(a, scope)
            return
        if isinstance(node, FunctionLit):
            resolve_block(node.body, scope | set(node.params))
            return
        for child in _children(node):
            resolve_expr(child, scope)

    def resolve_block(block: Block, scope: set):
        scope = set(scope)
        for stmt in block.stmts:
            if isinstance(stmt, VarStmt):
                resolve_expr(stmt.value, scope)
                scope.add(stmt.name)
            elif isinstance(stmt, ReturnStmt):
                resolve_expr(stmt.value, scope)
            elif isinstance(stmt, IfStmt):
                resolve_if(stmt, scope)
            elif isinstance(stmt, _CondInBlock):
                raise UnsupportedConstruct(
                    "condition inside a function (conditions belong at the model top level)",
                    stmt.span.line,
                    stmt.span.col,
                )
            else:
                raise TypeError(f"unexpected statement {stmt!r}")

    def resolve_if(stmt: IfStmt, scope: set):
        resolve_expr(stmt.cond, scope)
        resolve_block(stmt.then, scope)
        if isinstance(stmt.orelse, IfStmt):
            resolve_if(stmt.orelse, scope)
        elif isinstance(stmt.orelse, Block):
            resolve_block(stmt.orelse, scope)

    for stmt in program.body:
        if isinstance(stmt, NamedFunction):
            resolve_block(stmt.body, set(stmt.params))
        elif isinstance(stmt, ValueBinding):
            resolve_expr(stmt.value, set())
        elif isinstance(stmt, Condition):
            resolve_expr(stmt.expr, set())
        elif isinstance(stmt, QueryReturn):
            resolve_expr(stmt.record, set())


# ---------------------------------------------------------------------------
# Public API


def parse(source: str) -> Program:
    """Parse MedPPL source into a Program.

    Raises MedSyntaxError, UnknownIdentifier or UnsupportedConstruct."""
    return _Parser(source).parse_program()


def parse_expression(source: str) -> Expr:
    """Parse one expression without name resolution (translation statements
    reference functions the model has yet to define)."""
    parser = _Parser(source)
    expr = parser.parse_expr()
    trailing = parser.peek()
    if trailing.kind != "eof":
        raise MedSyntaxError(
            f"unexpected '{trailing.text}' after expression",
            trailing.span.line,
            trailing.span.col,
        )
    return expr


def called_names(expr: Expr) -> set:
    """Identifiers an expression needs resolved, excluding primitives: the
    functions a model synthesized from this expression must define."""
    names: set = set()

    def visit(node):
        if isinstance(node, Ident) and node.name not in PRIMITIVES:
            names.add(node.name)
        for child in _children(node):
            visit(child)

    visit(expr)
    return names


def render(program: Program) -> str:
    """Canonical pretty-printed source. parse(render(p)) is structurally
    equal to p, and render∘parse is the identity on already-normalized
    source."""
    lines = ["var model = function() {"]
    for stmt in program.body:
        lines.append(_render_top(stmt, 1))
    lines.append("}")
    return "\n".join(lines) + "\n"


_IND = "  "


def _render_top(stmt, depth: int) -> str:
    pad = _IND * depth
    if isinstance(stmt, NamedFunction):
        fn = f"function({', '.join(stmt.params)}) " + _render_block(stmt.body, depth)
        if stmt.memoized:
            fn = f"mem({fn})"
        return f"{pad}var {stmt.name} = {fn}"
    if isinstance(stmt, ValueBinding):
        return f"{pad}var {stmt.name} = {render_expr(stmt.value, depth)}"
    if isinstance(stmt, Condition):
        return f"{pad}condition({render_expr(stmt.expr, depth)})"
    if isinstance(stmt, QueryReturn):
        return f"{pad}return {render_expr(stmt.record, depth)}"
    raise TypeError(f"unexpected top statement {stmt!r}")


def _render_block(block: Block, depth: int) -> str:
    pad = _IND * depth
    lines = ["{"]
    for stmt in block.stmts:
        lines.append(_render_stmt(stmt, depth + 1))
    lines.append(pad + "}")
    return "\n".join(lines)


def _render_stmt(stmt, depth: int) -> str:
    pad = _IND * depth
    if isinstance(stmt, VarStmt):
        return f"{pad}var {stmt.name} = {render_expr(stmt.value, depth)}"
    if isinstance(stmt, ReturnStmt):
        return f"{pad}return {render_expr(stmt.value, depth)}"
    if isinstance(stmt, IfStmt):
        return pad + _render_if(stmt, depth)
    raise TypeError(f"unexpected statement {stmt!r}")


def _render_if(stmt: IfStmt, depth: int) -> str:
    text = f"if ({render_expr(stmt.cond, depth)}) " + _render_block(stmt.then, depth)
    if isinstance(stmt.orelse, IfStmt):
        text += " else " + _render_if(stmt.orelse, depth)
    elif isinstance(stmt.orelse, Block):
        text += " else " + _render_block(stmt.orelse, depth)
    return text


_PREC = {
    "?:": 1,
    "||": 2,
    "&&": 3,
    "==": 4,
    "!=": 4,
    "<": 5,
    "<=": 5,
    ">": 5,
    ">=": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
    "unary": 8,
    "postfix": 9,
    "atom": 10,
}


def render_expr(node: Expr, depth: int = 0) -> str:
    text, _ = _render_prec(node, depth)
    return text


def _render_prec(node, depth: int) -> tuple[str, int]:
    if isinstance(node, NumberLit):
        return render_number(node.value), _PREC["atom"]
    if isinstance(node, StringLit):
        return f"'{node.value}'", _PREC["atom"]
    if isinstance(node, BoolLit):
        return "true" if node.value else "false", _PREC["atom"]
    if isinstance(node, Ident):
        return node.name, _PREC["atom"]
    if isinstance(node, ListLit):
        return "[" + ", ".join(render_expr(i, depth) for i in node.items) + "]", _PREC["atom"]
    if isinstance(node, RecordLit):
        inner = ", ".join(f"{k}: {render_expr(v, depth)}" for k, v in node.entries)
        return "{" + inner + "}", _PREC["atom"]
    if isinstance(node, Call):
        callee, cp = _render_prec(node.callee, depth)
        if cp < _PREC["postfix"]:
            callee = f"({callee})"
        args = ", ".join(render_expr(a, depth) for a in node.args)
        return f"{callee}({args})", _PREC["postfix"]
    if isinstance(node, Includes):
        recv, rp = _render_prec(node.receiver, depth)
        if rp < _PREC["postfix"]:
            recv = f"({recv})"
        return f"{recv}.includes({render_expr(node.item, depth)})", _PREC["postfix"]
    if isinstance(node, Unary):
        inner, ip = _render_prec(node.operand, depth)
        if ip < _PREC["unary"]:
            inner = f"({inner})"
        return f"{node.op}{inner}", _PREC["unary"]
    if isinstance(node, Binary):
        prec = _PREC[node.op]
        left, lp = _render_prec(node.left, depth)
        right, rp = _render_prec(node.right, depth)
        if lp < prec:
            left = f"({left})"
        if rp <= prec:  # left-associative: parenthesize equal-prec right side
            right = f"({right})"
        return f"{left} {node.op} {right}", prec
    if isinstance(node, Ternary):
        cond, cp = _render_prec(node.cond, depth)
        if cp <= _PREC["?:"]:
            cond = f"({cond})"
        then = render_expr(node.then, depth)
        other = render_expr(node.other, depth)
        if isinstance(node.then, Ternary):
            then = f"({then})"
        return f"{cond} ? {then} : {other}", _PREC["?:"]
    if isinstance(node, FunctionLit):
        return f"function({', '.join(node.params)}) " + _render_block(node.body, depth), _PREC["atom"]
    raise TypeError(f"not an expression node: {node!r}")


def render_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)
