"""Exact enumeration over discrete programs.

Expands every random-choice path by depth-first replay: each pending path is
re-executed from the top with its choice prefix pinned, and the first fresh
choice point suspends execution and forks one extension per positive-
probability option. Paths that fail a condition contribute to the rejected
mass; surviving paths are normalized per query. This is the calibration
oracle for the rejection sampler and must stay independent of the compiled
evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ContinuousUnsupported, MedRuntimeError, PathExplosion
from .interp import Interpreter
from .validate import uses_gaussian
from .values import categorical_total, render_value, require_number
from .syntax import Program

DEFAULT_PATH_CAP = 10**7


@dataclass(frozen=True)
class ExactDistribution:
    """Per-query posterior, keyed by the canonical string form of each value.

    evidence is the prior probability of satisfying every condition (the
    expected acceptance rate of rejection sampling)."""

    queries: dict  # query-name -> {value-string: probability}
    evidence: float
    paths: int

    def probability(self, query: str, value_string: str) -> float:
        return self.queries.get(query, {}).get(value_string, 0.0)

    def to_json(self) -> dict:
        return {
            "queries": {
                q: {k: v for k, v in sorted(dist.items())} for q, dist in self.queries.items()
            },
            "evidence": self.evidence,
            "paths": self.paths,
        }

    @staticmethod
    def from_json(d: dict) -> "ExactDistribution":
        return ExactDistribution(queries=d["queries"], evidence=d["evidence"], paths=d["paths"])


class _Suspend(Exception):
    def __init__(self, options):
        self.options = options


class _EnumDriver:
    """Replays a pinned choice prefix, then suspends at the first new choice.

    Weights accumulate as exact rationals so the result is bit-identical
    under any reordering of conditions or accumulation (float products are
    not associative; Fractions are)."""

    __slots__ = ("prefix", "pos", "weight", "choices")

    def __init__(self, prefix: tuple):
        self.prefix = prefix
        self.pos = 0
        self.weight = Fraction(1)
        self.choices = 0

    def _choose(self, options):
        if self.pos < len(self.prefix):
            index = self.prefix[self.pos]
            self.pos += 1
            self.choices += 1
            value, p = options[index]
            self.weight *= Fraction(p)
            return value
        raise _Suspend(options)

    def flip(self, p) -> bool:
        p = require_number(p)
        if not (0.0 <= p <= 1.0):
            raise MedRuntimeError(f"flip probability {p} outside [0, 1]")
        return self._choose(((True, p), (False, 1.0 - p)))

    def categorical(self, ps, vs):
        total = categorical_total(ps, vs)
        return self._choose(tuple((v, p / total) for p, v in zip(ps, vs)))

    def gaussian(self, mu, sigma):
        raise ContinuousUnsupported("program draws from gaussian; enumeration is discrete-only")


def enumerate_program(program: Program, path_cap: int = DEFAULT_PATH_CAP) -> ExactDistribution:
    """Exact posterior for a discrete program.

    Raises ContinuousUnsupported if the program mentions gaussian, and
    PathExplosion past path_cap explored paths."""
    if uses_gaussian(program):
        raise ContinuousUnsupported("program draws from gaussian; enumeration is discrete-only")

    queries: dict[str, dict[str, Fraction]] = {}
    evidence = Fraction(0)
    paths = 0
    stack: list[tuple] = [()]
    while stack:
        prefix = stack.pop()
        driver = _EnumDriver(prefix)
        try:
            outcome = Interpreter(driver).execute(program)
        except _Suspend as suspend:
            for index in range(len(suspend.options) - 1, -1, -1):
                if suspend.options[index][1] > 0.0:
                    stack.append(prefix + (index,))
            continue
        paths += 1
        if paths > path_cap:
            raise PathExplosion(path_cap)
        if outcome.accepted:
            evidence += driver.weight
            for query, value in outcome.sample.items():
                bucket = queries.setdefault(query, {})
                key = render_value(value)
                bucket[key] = bucket.get(key, Fraction(0)) + driver.weight

    if evidence <= 0:
        raise MedRuntimeError("no path satisfies the conditions (evidence probability is zero)")
    normalized = {
        q: {k: float(w / evidence) for k, w in sorted(dist.items())} for q, dist in queries.items()
    }
    return ExactDistribution(queries=normalized, evidence=float(evidence), paths=paths)
