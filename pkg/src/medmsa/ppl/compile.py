"""Compile a validated Program to a Python closure for fast rejection sampling.

The generated code draws from the random source with exactly the same
protocol as the reference interpreter (one uniform per flip, one scaled
uniform with a cumulative left-to-right scan per categorical, one gauss per
gaussian, the same short-circuiting), so a compiled run and an interpreted
run with equal generator state produce identical outcomes. Tests enforce
that agreement; exact.py deliberately does not share this engine.

A compiled model returns the query record, or None when a condition fails.
"""

from __future__ import annotations

from .errors import MedRuntimeError
from .values import (
    categorical_total,
    check_value,
    mem_key,
    require_bool,
    require_number,
    values_equal,
)
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
    Program,
    QueryReturn,
    RecordLit,
    ReturnStmt,
    StringLit,
    Ternary,
    Unary,
    ValueBinding,
    VarStmt,
    render_number,
)


def _flip(rng, p):
    if p.__class__ is bool or not isinstance(p, (int, float)) or not (0.0 <= p <= 1.0):
        raise MedRuntimeError(f"flip probability {p!r} outside [0, 1]")
    return rng.random() < p


def _categorical(rng, spec):
    if type(spec) is not dict or len(spec) != 2 or "ps" not in spec or "vs" not in spec:
        raise MedRuntimeError("categorical expects {ps: [...], vs: [...]}")
    ps = spec["ps"]
    vs = spec["vs"]
    total = categorical_total(ps, vs)
    u = rng.random() * total
    acc = 0.0
    for p, v in zip(ps, vs):
        acc += p
        if u < acc:
            return v
    return vs[-1]


def _gaussian(rng, mu, sigma):
    mu = require_number(mu)
    sigma = require_number(sigma)
    if sigma <= 0:
        raise MedRuntimeError(f"gaussian sigma must be positive, got {sigma}")
    return rng.gauss(mu, sigma)


def _includes(receiver, item):
    if not isinstance(receiver, list):
        raise MedRuntimeError(".includes on a non-list")
    return any(values_equal(x, item) for x in receiver)


def _neg(v):
    return -require_number(v)


def _not(v):
    return not require_bool(v)


def _lt(a, b):
    return require_number(a) < require_number(b)


def _le(a, b):
    return require_number(a) <= require_number(b)


def _gt(a, b):
    return require_number(a) > require_number(b)


def _ge(a, b):
    return require_number(a) >= require_number(b)


def _add(a, b):
    return require_number(require_number(a) + require_number(b))


def _sub(a, b):
    return require_number(require_number(a) - require_number(b))


def _mul(a, b):
    return require_number(require_number(a) * require_number(b))


def _div(a, b):
    b = require_number(b)
    if b == 0:
        raise MedRuntimeError("division by zero")
    return require_number(require_number(a) / b)


def _finalize(record):
    for v in record.values():
        check_value(v)
    return record


def _fell_off():
    raise MedRuntimeError("function finished without returning a value")


_HELPERS = {
    "_flip": _flip,
    "_categorical": _categorical,
    "_gaussian": _gaussian,
    "_includes": _includes,
    "_eq": values_equal,
    "_b": require_bool,
    "_neg": _neg,
    "_not": _not,
    "_lt": _lt,
    "_le": _le,
    "_gt": _gt,
    "_ge": _ge,
    "_add": _add,
    "_sub": _sub,
    "_mul": _mul,
    "_div": _div,
    "_memkey": mem_key,
    "_finalize": _finalize,
    "_fell_off": _fell_off,
}


class _Codegen:
    def __init__(self):
        self.lines: list[str] = []
        self.counter = 0

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    def fresh(self, base: str) -> str:
        self.counter += 1
        return f"_{base}{self.counter}"

    # -- expressions ---------------------------------------------------------

    def expr(self, node) -> str:
        if isinstance(node, NumberLit):
            return render_number(node.value)
        if isinstance(node, StringLit):
            return repr(node.value)
        if isinstance(node, BoolLit):
            return "True" if node.value else "False"
        if isinstance(node, Ident):
            return _mangle(node.name)
        if isinstance(node, ListLit):
            return "[" + ", ".join(self.expr(i) for i in node.items) + "]"
        if isinstance(node, RecordLit):
            return "{" + ", ".join(f"{k!r}: {self.expr(v)}" for k, v in node.entries) + "}"
        if isinstance(node, Call):
            return self.call(node)
        if isinstance(node, Includes):
            return f"_includes({self.expr(node.receiver)}, {self.expr(node.item)})"
        if isinstance(node, Unary):
            helper = "_not" if node.op == "!" else "_neg"
            return f"{helper}({self.expr(node.operand)})"
        if isinstance(node, Binary):
            return self.binary(node)
        if isinstance(node, Ternary):
            return f"({self.expr(node.then)} if _b({self.expr(node.cond)}) else {self.expr(node.other)})"
        if isinstance(node, FunctionLit):
            raise _NotCompilable("function literal outside a var binding")
        raise _NotCompilable(type(node).__name__)

    def call(self, node: Call) -> str:
        callee = node.callee
        if isinstance(callee, Ident):
            name = callee.name
            args = [self.expr(a) for a in node.args]
            if name == "flip":
                self._arity(node, 1)
                if isinstance(node.args[0], NumberLit):
                    p = node.args[0].value
                    if not (0.0 <= p <= 1.0):
                        raise MedRuntimeError(f"flip probability {p} outside [0, 1]")
                    return f"(_rng.random() < {render_number(p)})"
                return f"_flip(_rng, {args[0]})"
            if name == "categorical":
                self._arity(node, 1)
                return f"_categorical(_rng, {args[0]})"
            if name == "gaussian":
                self._arity(node, 2)
                return f"_gaussian(_rng, {args[0]}, {args[1]})"
            if name == "mem":
                raise _NotCompilable("mem outside a var binding")
            if name == "condition":
                raise MedRuntimeError("condition may only appear at the model top level")
            return f"{_mangle(name)}({', '.join(args)})"
        raise _NotCompilable("computed callee")

    def binary(self, node: Binary) -> str:
        op = node.op
        left, right = node.left, node.right
        if op == "&&":
            return f"(_b({self.expr(left)}) and _b({self.expr(right)}))"
        if op == "||":
            return f"(_b({self.expr(left)}) or _b({self.expr(right)}))"
        if op == "==":
            return f"_eq({self.expr(left)}, {self.expr(right)})"
        if op == "!=":
            return f"(not _eq({self.expr(left)}, {self.expr(right)}))"
        helper = {"<": "_lt", "<=": "_le", ">": "_gt", ">=": "_ge", "+": "_add", "-": "_sub", "*": "_mul", "/": "_div"}[op]
        return f"{helper}({self.expr(left)}, {self.expr(right)})"

    @staticmethod
    def _arity(node: Call, expected: int) -> None:
        if len(node.args) != expected:
            name = node.callee.name
            raise MedRuntimeError(
                f"{name} takes {expected} argument{'s' if expected != 1 else ''}, got {len(node.args)}"
            )

    # -- statements ----------------------------------------------------------

    def block(self, block: Block, depth: int) -> None:
        if not block.stmts:
            self.emit(depth, "pass")
            return
        for stmt in block.stmts:
            self.stmt(stmt, depth)

    def stmt(self, stmt, depth: int) -> None:
        if isinstance(stmt, VarStmt):
            if isinstance(stmt.value, FunctionLit):
                self.function_def(_mangle(stmt.name), stmt.value.params, stmt.value.body, depth, memoized=False)
            elif _is_mem_of_function(stmt.value):
                fn = stmt.value.args[0]
                self.function_def(_mangle(stmt.name), fn.params, fn.body, depth, memoized=True)
            else:
                self.emit(depth, f"{_mangle(stmt.name)} = {self.expr(stmt.value)}")
        elif isinstance(stmt, ReturnStmt):
            self.emit(depth, f"return {self.expr(stmt.value)}")
        elif isinstance(stmt, IfStmt):
            self.if_stmt(stmt, depth, "if")
        else:
            raise _NotCompilable(type(stmt).__name__)

    def if_stmt(self, stmt: IfStmt, depth: int, keyword: str) -> None:
        self.emit(depth, f"{keyword} _b({self.expr(stmt.cond)}):")
        self.block(stmt.then, depth + 1)
        if isinstance(stmt.orelse, IfStmt):
            self.if_stmt(stmt.orelse, depth, "elif")
        elif isinstance(stmt.orelse, Block):
            self.emit(depth, "else:")
            self.block(stmt.orelse, depth + 1)

    def function_def(self, pyname: str, params, body: Block, depth: int, memoized: bool) -> None:
        plist = ", ".join(_mangle(p) for p in params)
        if not memoized:
            self.emit(depth, f"def {pyname}({plist}):")
            self.block(body, depth + 1)
            self.emit(depth + 1, "_fell_off()")
            return
        # Inline memo table, fresh per model run. Plain-string keys (the
        # common case: patient names) skip the tagging in mem_key.
        table = self.fresh("m")
        inner = self.fresh("f")
        self.emit(depth, f"{table} = {{}}")
        self.emit(depth, f"def {inner}({plist}):")
        self.block(body, depth + 1)
        self.emit(depth + 1, "_fell_off()")
        self.emit(depth, f"def {pyname}({plist}, _t={table}, _f={inner}):")
        if len(params) == 1:
            a = _mangle(params[0])
            self.emit(depth + 1, f"_k = {a} if {a}.__class__ is str else _memkey(({a},))")
        elif params:
            names = ", ".join(_mangle(p) for p in params)
            self.emit(depth + 1, f"_k = _memkey(({names},))")
        else:
            self.emit(depth + 1, "_k = ()")
        self.emit(depth + 1, "if _k in _t:")
        self.emit(depth + 2, "return _t[_k]")
        self.emit(depth + 1, f"_v = _f({plist})" if params else "_v = _f()")
        self.emit(depth + 1, "_t[_k] = _v")
        self.emit(depth + 1, "return _v")


class _NotCompilable(Exception):
    """Legal MedPPL outside the compiled subset; callers fall back to the
    reference interpreter."""


def _mangle(name: str) -> str:
    return "v_" + name


def _is_mem_of_function(node) -> bool:
    return (
        isinstance(node, Call)
        and isinstance(node.callee, Ident)
        and node.callee.name == "mem"
        and len(node.args) == 1
        and isinstance(node.args[0], FunctionLit)
    )


def compile_program(program: Program):
    """Returns run(rng) -> query record dict, or None on a failed condition.

    Pre: validate(program) returned no diagnostics. Raises _NotCompilable for
    exotic-but-legal programs (computed callees, bare function values); the
    sampler falls back to the interpreter for those."""
    gen = _Codegen()
    gen.emit(0, "def _model(_rng):")
    for stmt in program.body:
        if isinstance(stmt, NamedFunction):
            gen.function_def(_mangle(stmt.name), stmt.params, stmt.body, 1, memoized=stmt.memoized)
        elif isinstance(stmt, ValueBinding):
            gen.stmt(VarStmt(name=stmt.name, value=stmt.value), 1)
        elif isinstance(stmt, Condition):
            gen.emit(1, f"if not _b({gen.expr(stmt.expr)}):")
            gen.emit(2, "return None")
        elif isinstance(stmt, QueryReturn):
            record = "{" + ", ".join(f"{k!r}: {gen.expr(v)}" for k, v in stmt.record.entries) + "}"
            gen.emit(1, f"return _finalize({record})")
    source = "\n".join(gen.lines) + "\n"
    namespace = dict(_HELPERS)
    exec(compile(source, "<medppl>", "exec"), namespace)
    return namespace["_model"]


NotCompilable = _NotCompilable
