"""Runtime value semantics shared by the interpreter and the compiled evaluator.

MedPPL values are booleans, finite numbers, single-quoted strings, lists and
records. Python's bool/int/float/str/list/dict carry them at runtime; the
helpers here pin down the language-level semantics (strict typing, no JS-style
coercion, no NaN/infinity) in one place.
"""

from __future__ import annotations

import math

from .errors import MedRuntimeError

Value = bool | int | float | str | list | dict


def is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def require_bool(v) -> bool:
    if type(v) is not bool:
        raise MedRuntimeError(f"expected a boolean, got {type_name(v)}")
    return v


def require_number(v) -> float:
    if not is_number(v):
        raise MedRuntimeError(f"expected a number, got {type_name(v)}")
    if not math.isfinite(v):
        raise MedRuntimeError("number is not finite")
    return v


def type_name(v) -> str:
    if type(v) is bool:
        return "boolean"
    if is_number(v):
        return "number"
    if isinstance(v, str):
        return "string"
    if isinstance(v, list):
        return "list"
    if isinstance(v, dict):
        return "record"
    return type(v).__name__


def values_equal(a, b) -> bool:
    """MedPPL ==: booleans only equal booleans, numbers compare numerically,
    strings/lists/records structurally. true == 1 is false here."""
    ta, tb = a.__class__, b.__class__
    if ta is tb and (ta is str or ta is bool or ta is float or ta is int):
        return a == b
    a_bool, b_bool = ta is bool, tb is bool
    if a_bool or b_bool:
        return False  # same-class bools handled above
    if is_number(a) and is_number(b):
        return a == b
    if isinstance(a, str) and isinstance(b, str):
        return a == b
    if isinstance(a, list) and isinstance(b, list):
        return len(a) == len(b) and all(values_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(values_equal(a[k], b[k]) for k in a)
    return False


def categorical_total(ps, vs) -> float:
    """Validate a categorical weight spec and return the weight sum. Shared
    by every execution engine: this is language semantics, not inference."""
    if type(ps) is not list or type(vs) is not list:
        raise MedRuntimeError("categorical expects {ps: [...], vs: [...]}")
    if len(ps) != len(vs):
        raise MedRuntimeError(f"categorical ps has {len(ps)} entries but vs has {len(vs)}")
    if not ps:
        raise MedRuntimeError("categorical with empty support")
    total = 0.0
    for p in ps:
        if p.__class__ is bool:
            raise MedRuntimeError("categorical weight is a boolean, not a number")
        try:
            nonneg = p >= 0.0
        except TypeError:
            raise MedRuntimeError(f"categorical weight {p!r} is not a number") from None
        if not nonneg:  # catches negatives and NaN
            raise MedRuntimeError(f"categorical weight {p!r} is not a non-negative number")
        total += p
    if not (0.0 < total < math.inf):
        raise MedRuntimeError("categorical weights sum to zero or overflow")
    return total


def mem_key(args: tuple) -> tuple:
    """Hashable memoization key. Booleans are tagged so mem(f)(true) and
    mem(f)(1) occupy distinct cache slots despite hash(True) == hash(1)."""
    return tuple(_freeze(a) for a in args)


def _freeze(v):
    if type(v) is bool:
        return ("#b", v)
    if isinstance(v, list):
        return ("#l", tuple(_freeze(x) for x in v))
    if isinstance(v, dict):
        return ("#r", tuple(sorted((k, _freeze(x)) for k, x in v.items())))
    return v


def check_value(v) -> Value:
    """Boundary check when a value enters a sample/query record: numbers must
    be finite, nested structures checked recursively."""
    if type(v) is bool or isinstance(v, str):
        return v
    if is_number(v):
        if not math.isfinite(v):
            raise MedRuntimeError("query produced a non-finite number")
        return v
    if isinstance(v, list):
        for x in v:
            check_value(x)
        return v
    if isinstance(v, dict):
        for x in v.values():
            check_value(x)
        return v
    if callable(v):
        raise MedRuntimeError("a function escaped into a query value")
    raise MedRuntimeError(f"unsupported value of type {type(v).__name__}")


def render_value(v) -> str:
    """Canonical string form of a value, used as distribution keys and for
    display. Strings render bare (they are the category labels canonicalize
    consumes); booleans render as true/false; integral floats drop the .0."""
    if type(v) is bool:
        return "true" if v else "false"
    if is_number(v):
        if isinstance(v, float) and v.is_integer():
            return str(int(v))
        return repr(v)
    if isinstance(v, str):
        return v
    if isinstance(v, list):
        return "[" + ", ".join(render_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {render_value(x)}" for k, x in v.items()) + "}"
    raise MedRuntimeError(f"cannot render value of type {type(v).__name__}")
