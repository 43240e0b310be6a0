"""Reference tree-walking evaluator for MedPPL.

run_once executes a model against a random driver and is the semantic
reference; the enumeration driver in exact.py reuses the same evaluator with
a choice-replay strategy. The compiled evaluator in compile.py is a separate
engine whose draw-for-draw agreement with this one is enforced by tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

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
)


class Status(enum.Enum):
    ACCEPTED = "accepted"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Outcome:
    status: Status
    sample: dict | None  # query-name -> value, present iff accepted
    trace_choices: int

    @property
    def accepted(self) -> bool:
        return self.status is Status.ACCEPTED


class RandomDriver:
    """Draws from a seeded random.Random-compatible source."""

    def __init__(self, rng):
        self.rng = rng
        self.choices = 0

    def flip(self, p) -> bool:
        p = require_number(p)
        if not (0.0 <= p <= 1.0):
            raise MedRuntimeError(f"flip probability {p} outside [0, 1]")
        self.choices += 1
        return self.rng.random() < p

    def categorical(self, ps, vs):
        total = categorical_total(ps, vs)
        self.choices += 1
        u = self.rng.random() * total
        acc = 0.0
        for p, v in zip(ps, vs):
            acc += p
            if u < acc:
                return v
        return vs[-1]

    def gaussian(self, mu, sigma) -> float:
        mu = require_number(mu)
        sigma = require_number(sigma)
        if sigma <= 0:
            raise MedRuntimeError(f"gaussian sigma must be positive, got {sigma}")
        self.choices += 1
        return self.rng.gauss(mu, sigma)


class _Env:
    __slots__ = ("vars", "parent")

    def __init__(self, bindings: dict, parent: "_Env | None" = None):
        self.vars = bindings
        self.parent = parent

    def lookup(self, name: str):
        env = self
        while env is not None:
            if name in env.vars:
                return env.vars[name]
            env = env.parent
        raise MedRuntimeError(f"'{name}' referenced before its definition was evaluated")


class Closure:
    __slots__ = ("params", "body", "env", "interp")

    def __init__(self, params, body, env, interp):
        self.params = params
        self.body = body
        self.env = env
        self.interp = interp

    def call(self, args):
        if len(args) != len(self.params):
            raise MedRuntimeError(
                f"function of {len(self.params)} parameters called with {len(args)} arguments"
            )
        frame = _Env(dict(zip(self.params, args)), self.env)
        returned, value = self.interp.exec_block(self.body, frame)
        if not returned:
            raise MedRuntimeError("function finished without returning a value")
        return value


class MemoizedClosure:
    __slots__ = ("inner", "cache")

    def __init__(self, inner):
        self.inner = inner
        self.cache: dict = {}

    def call(self, args):
        key = mem_key(tuple(args))
        if key in self.cache:
            return self.cache[key]
        value = self.inner.call(args)
        self.cache[key] = value
        return value


class Interpreter:
    """One execution of a program under a driver. Not reusable."""

    def __init__(self, driver):
        self.driver = driver

    def execute(self, program: Program) -> Outcome:
        top = _Env({})
        try:
            for stmt in program.body:
                if isinstance(stmt, NamedFunction):
                    closure = Closure(stmt.params, stmt.body, top, self)
                    top.vars[stmt.name] = MemoizedClosure(closure) if stmt.memoized else closure
                elif isinstance(stmt, ValueBinding):
                    top.vars[stmt.name] = self.eval(stmt.value, top)
                elif isinstance(stmt, Condition):
                    if not require_bool(self.eval(stmt.expr, top)):
                        return Outcome(Status.REJECTED, None, self.driver.choices)
                elif isinstance(stmt, QueryReturn):
                    sample = {
                        key: check_value(self.eval(expr, top))
                        for key, expr in stmt.record.entries
                    }
                    return Outcome(Status.ACCEPTED, sample, self.driver.choices)
        except RecursionError:
            raise MedRuntimeError("model recursion exceeded the interpreter depth limit") from None
        raise MedRuntimeError("model has no query return")

    def exec_block(self, block: Block, env: _Env):
        for stmt in block.stmts:
            if isinstance(stmt, VarStmt):
                env.vars[stmt.name] = self.eval(stmt.value, env)
            elif isinstance(stmt, ReturnStmt):
                return True, self.eval(stmt.value, env)
            elif isinstance(stmt, IfStmt):
                returned, value = self.exec_if(stmt, env)
                if returned:
                    return True, value
            else:
                raise MedRuntimeError(f"unsupported statement {type(stmt).__name__}")
        return False, None

    def exec_if(self, stmt: IfStmt, env: _Env):
        if require_bool(self.eval(stmt.cond, env)):
            return self.exec_block(stmt.then, _Env({}, env))
        if isinstance(stmt.orelse, IfStmt):
            return self.exec_if(stmt.orelse, env)
        if isinstance(stmt.orelse, Block):
            return self.exec_block(stmt.orelse, _Env({}, env))
        return False, None

    def eval(self, node, env: _Env):
        if isinstance(node, NumberLit):
            return node.value
        if isinstance(node, StringLit):
            return node.value
        if isinstance(node, BoolLit):
            return node.value
        if isinstance(node, Ident):
            return env.lookup(node.name)
        if isinstance(node, ListLit):
            return [self.eval(i, env) for i in node.items]
        if isinstance(node, RecordLit):
            return {k: self.eval(v, env) for k, v in node.entries}
        if isinstance(node, Call):
            return self.eval_call(node, env)
        if isinstance(node, Includes):
            receiver = self.eval(node.receiver, env)
            if not isinstance(receiver, list):
                raise MedRuntimeError(".includes on a non-list")
            item = self.eval(node.item, env)
            return any(values_equal(x, item) for x in receiver)
        if isinstance(node, Unary):
            operand = self.eval(node.operand, env)
            if node.op == "!":
                return not require_bool(operand)
            return -require_number(operand)
        if isinstance(node, Binary):
            return self.eval_binary(node, env)
        if isinstance(node, Ternary):
            if require_bool(self.eval(node.cond, env)):
                return self.eval(node.then, env)
            return self.eval(node.other, env)
        if isinstance(node, FunctionLit):
            return Closure(node.params, node.body, env, self)
        raise MedRuntimeError(f"cannot evaluate {type(node).__name__}")

    def eval_call(self, node: Call, env: _Env):
        callee = node.callee
        if isinstance(callee, Ident):
            name = callee.name
            if name == "flip":
                self._arity(node, 1)
                return self.driver.flip(self.eval(node.args[0], env))
            if name == "categorical":
                self._arity(node, 1)
                spec = self.eval(node.args[0], env)
                if not isinstance(spec, dict) or set(spec) != {"ps", "vs"}:
                    raise MedRuntimeError("categorical expects {ps: [...], vs: [...]}")
                return self.driver.categorical(spec["ps"], spec["vs"])
            if name == "gaussian":
                self._arity(node, 2)
                mu = self.eval(node.args[0], env)
                sigma = self.eval(node.args[1], env)
                return self.driver.gaussian(mu, sigma)
            if name == "mem":
                self._arity(node, 1)
                inner = self.eval(node.args[0], env)
                if not isinstance(inner, (Closure, MemoizedClosure)):
                    raise MedRuntimeError("mem expects a function")
                return MemoizedClosure(inner) if isinstance(inner, Closure) else inner
            if name == "condition":
                raise MedRuntimeError("condition may only appear at the model top level")
        fn = self.eval(callee, env)
        if not isinstance(fn, (Closure, MemoizedClosure)):
            raise MedRuntimeError("attempted to call a non-function value")
        args = [self.eval(a, env) for a in node.args]
        return fn.call(args)

    def eval_binary(self, node: Binary, env: _Env):
        op = node.op
        if op == "&&":
            if not require_bool(self.eval(node.left, env)):
                return False
            return require_bool(self.eval(node.right, env))
        if op == "||":
            if require_bool(self.eval(node.left, env)):
                return True
            return require_bool(self.eval(node.right, env))
        left = self.eval(node.left, env)
        right = self.eval(node.right, env)
        if op == "==":
            return values_equal(left, right)
        if op == "!=":
            return not values_equal(left, right)
        lnum = require_number(left)
        rnum = require_number(right)
        if op == "<":
            return lnum < rnum
        if op == "<=":
            return lnum <= rnum
        if op == ">":
            return lnum > rnum
        if op == ">=":
            return lnum >= rnum
        if op == "+":
            result = lnum + rnum
        elif op == "-":
            result = lnum - rnum
        elif op == "*":
            result = lnum * rnum
        elif op == "/":
            if rnum == 0:
                raise MedRuntimeError("division by zero")
            result = lnum / rnum
        else:
            raise MedRuntimeError(f"unsupported operator '{op}'")
        return require_number(result)

    @staticmethod
    def _arity(node: Call, expected: int) -> None:
        if len(node.args) != expected:
            name = node.callee.name
            raise MedRuntimeError(
                f"{name} takes {expected} argument{'s' if expected != 1 else ''}, got {len(node.args)}"
            )


def run_once(program: Program, rng) -> Outcome:
    """Execute the model once. Pre: validate(program) returned no diagnostics.

    flip(p) is true with probability p; categorical draws vs[i] with
    probability ps[i]/sum(ps); gaussian(mu, sigma) draws a normal variate;
    mem caches per argument tuple within this execution only. The first
    false condition yields a Rejected outcome."""
    return Interpreter(RandomDriver(rng)).execute(program)
