"""Static checks for parsed programs.

Diagnostics, never exceptions: an empty list means the program is safe to
hand to the samplers. Name resolution is re-checked here even though parse
enforces it, so validate() is a complete report for any Program however it
was constructed.
"""

from __future__ import annotations

from .errors import Diagnostic
from .syntax import (
    Binary,
    Block,
    BoolLit,
    Call,
    Condition,
    FunctionLit,
    Ident,
    IfStmt,
    Includes,
    ListLit,
    NamedFunction,
    NumberLit,
    PRIMITIVES,
    Program,
    QueryReturn,
    RecordLit,
    ReturnStmt,
    StringLit,
    Ternary,
    Unary,
    ValueBinding,
    VarStmt,
    _children,
)

_PRIMITIVE_ARITY = {"flip": 1, "gaussian": 2, "categorical": 1, "mem": 1}

# Static type lattice: 'bool' | 'number' | 'string' | 'list' | 'record' |
# 'function' | None (unknown).


def validate(program: Program) -> list[Diagnostic]:
    v = _Validator(program)
    v.run()
    return v.diagnostics


class _Validator:
    def __init__(self, program: Program):
        self.program = program
        self.diagnostics: list[Diagnostic] = []
        self.top_names = {d.name for d in program.definitions}

    def report(self, code: str, message: str, node) -> None:
        self.diagnostics.append(Diagnostic(code, message, node.span.line, node.span.col))

    def run(self) -> None:
        seen: set[str] = set()
        for d in self.program.definitions:
            if d.name in seen:
                self.report("DuplicateDefinition", f"'{d.name}' is defined twice", d)
            seen.add(d.name)

        if not self.program.query_record:
            self.report("EmptyQueryRecord", "the query record is empty", self.program.query_return)

        for stmt in self.program.body:
            if isinstance(stmt, NamedFunction):
                self.check_function(stmt)
            elif isinstance(stmt, ValueBinding):
                self.infer_expr(stmt.value, set())
            elif isinstance(stmt, Condition):
                t = self.infer_expr(stmt.expr, set())
                if t is not None and t != "bool":
                    self.report(
                        "ConditionNotBoolean",
                        f"condition argument is a {t}, not a boolean",
                        stmt,
                    )
            elif isinstance(stmt, QueryReturn):
                self.infer_expr(stmt.record, set())

    def check_function(self, fn: NamedFunction) -> None:
        if not self.block_returns(fn.body):
            self.report(
                "MissingReturn",
                f"function '{fn.name}' can fall off the end without returning",
                fn,
            )
        self.check_block(fn.body, set(fn.params))

    def block_returns(self, block: Block) -> bool:
        for stmt in block.stmts:
            if isinstance(stmt, ReturnStmt):
                return True
            if isinstance(stmt, IfStmt) and self.if_returns(stmt):
                return True
        return False

    def if_returns(self, stmt: IfStmt) -> bool:
        if stmt.orelse is None:
            return False
        then_ok = self.block_returns(stmt.then)
        if isinstance(stmt.orelse, IfStmt):
            return then_ok and self.if_returns(stmt.orelse)
        return then_ok and self.block_returns(stmt.orelse)

    def check_block(self, block: Block, scope: set) -> None:
        scope = set(scope)
        for stmt in block.stmts:
            if isinstance(stmt, VarStmt):
                self.infer_expr(stmt.value, scope)
                scope.add(stmt.name)
            elif isinstance(stmt, ReturnStmt):
                self.infer_expr(stmt.value, scope)
            elif isinstance(stmt, IfStmt):
                self.check_if(stmt, scope)

    def check_if(self, stmt: IfStmt, scope: set) -> None:
        t = self.infer_expr(stmt.cond, scope)
        if t is not None and t != "bool":
            self.report("ConditionNotBoolean", f"if-condition is a {t}, not a boolean", stmt)
        self.check_block(stmt.then, scope)
        if isinstance(stmt.orelse, IfStmt):
            self.check_if(stmt.orelse, scope)
        elif isinstance(stmt.orelse, Block):
            self.check_block(stmt.orelse, scope)

    # -- expression typing ---------------------------------------------------

    def infer_expr(self, node, scope: set):
        if isinstance(node, NumberLit):
            return "number"
        if isinstance(node, StringLit):
            return "string"
        if isinstance(node, BoolLit):
            return "bool"
        if isinstance(node, ListLit):
            for item in node.items:
                self.infer_expr(item, scope)
            return "list"
        if isinstance(node, RecordLit):
            for _, value in node.entries:
                self.infer_expr(value, scope)
            return "record"
        if isinstance(node, Ident):
            if node.name not in scope and node.name not in self.top_names:
                self.report("UnknownIdentifier", f"unknown identifier '{node.name}'", node)
            return None
        if isinstance(node, Call):
            return self.infer_call(node, scope)
        if isinstance(node, Includes):
            t = self.infer_expr(node.receiver, scope)
            if t is not None and t != "list":
                self.report("TypeMismatch", f".includes receiver is a {t}, not a list", node)
            self.infer_expr(node.item, scope)
            return "bool"
        if isinstance(node, Unary):
            t = self.infer_expr(node.operand, scope)
            if node.op == "!":
                if t is not None and t != "bool":
                    self.report("TypeMismatch", f"! applied to a {t}", node)
                return "bool"
            if t is not None and t != "number":
                self.report("TypeMismatch", f"unary - applied to a {t}", node)
            return "number"
        if isinstance(node, Binary):
            lt = self.infer_expr(node.left, scope)
            rt = self.infer_expr(node.right, scope)
            if node.op in ("&&", "||"):
                for t in (lt, rt):
                    if t is not None and t != "bool":
                        self.report("TypeMismatch", f"'{node.op}' operand is a {t}", node)
                return "bool"
            if node.op in ("==", "!="):
                return "bool"
            if node.op in ("<", "<=", ">", ">="):
                for t in (lt, rt):
                    if t is not None and t != "number":
                        self.report("TypeMismatch", f"'{node.op}' operand is a {t}", node)
                return "bool"
            for t in (lt, rt):
                if t is not None and t != "number":
                    self.report("TypeMismatch", f"'{node.op}' operand is a {t}", node)
            return "number"
        if isinstance(node, Ternary):
            t = self.infer_expr(node.cond, scope)
            if t is not None and t != "bool":
                self.report("TypeMismatch", f"ternary test is a {t}, not a boolean", node)
            then_t = self.infer_expr(node.then, scope)
            other_t = self.infer_expr(node.other, scope)
            return then_t if then_t == other_t else None
        if isinstance(node, FunctionLit):
            if not self.block_returns(node.body):
                self.report("MissingReturn", "function can fall off the end without returning", node)
            self.check_block(node.body, scope | set(node.params))
            return "function"
        raise TypeError(f"not an expression node: {node!r}")

    def infer_call(self, node: Call, scope: set):
        if isinstance(node.callee, Ident) and node.callee.name in PRIMITIVES:
            name = node.callee.name
            expected = _PRIMITIVE_ARITY.get(name)
            if expected is not None and len(node.args) != expected:
                self.report(
                    "ArityMismatch",
                    f"{name} takes {expected} argument{'s' if expected != 1 else ''}, got {len(node.args)}",
                    node,
                )
            for a in node.args:
                self.infer_expr(a, scope)
            if name == "flip":
                if node.args and isinstance(node.args[0], NumberLit):
                    p = node.args[0].value
                    if not (0.0 <= p <= 1.0):
                        self.report("BadArgument", f"flip probability {p} outside [0, 1]", node)
                return "bool"
            if name == "gaussian":
                if len(node.args) == 2 and isinstance(node.args[1], NumberLit) and node.args[1].value <= 0:
                    self.report("BadArgument", "gaussian sigma must be positive", node)
                return "number"
            if name == "categorical":
                self.check_categorical(node)
                return None
            if name == "mem":
                if node.args and not isinstance(node.args[0], (FunctionLit, Ident)):
                    self.report("TypeMismatch", "mem expects a function", node)
                return "function"
            return None
        self.infer_expr(node.callee, scope)
        for a in node.args:
            self.infer_expr(a, scope)
        return None

    def check_categorical(self, node: Call) -> None:
        if len(node.args) != 1:
            return
        arg = node.args[0]
        if not isinstance(arg, RecordLit):
            return  # runtime shape check covers non-literal arguments
        keys = [k for k, _ in arg.entries]
        if sorted(keys) != ["ps", "vs"]:
            self.report(
                "BadArgument",
                "categorical expects a record with exactly the keys ps and vs",
                node,
            )
            return
        entries = dict(arg.entries)
        ps, vs = entries["ps"], entries["vs"]
        if isinstance(ps, ListLit) and isinstance(vs, ListLit) and len(ps.items) != len(vs.items):
            self.report(
                "LengthMismatch",
                f"categorical ps has {len(ps.items)} entries but vs has {len(vs.items)}",
                node,
            )


def uses_gaussian(program: Program) -> bool:
    """True if any reachable expression calls gaussian (enumeration refuses)."""
    found = False

    def visit(node):
        nonlocal found
        if found:
            return
        if isinstance(node, Call) and isinstance(node.callee, Ident) and node.callee.name == "gaussian":
            found = True
            return
        for child in _children(node):
            visit(child)

    for stmt in program.body:
        visit(stmt)
    return found
