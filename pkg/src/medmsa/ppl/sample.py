"""Rejection sampling with wall-clock and proposal budgets."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .. import rng as rngmod
from .compile import NotCompilable, compile_program
from .errors import MedRuntimeError
from .interp import run_once
from .syntax import Program
from .values import render_value


@dataclass(frozen=True)
class Budget:
    """Limits for one sampling call. None disables a limit. Budget exhaustion
    is an outcome, not an error."""

    max_seconds: float | None = None
    max_proposals: int | None = None


@dataclass(frozen=True)
class SampleSet:
    """Accepted draws for one model. Every per-query list has length
    accepted_count. wall_time is diagnostic and excluded from equality."""

    model_id: str
    queries: dict  # query-name -> list of values, aligned across queries
    accepted_count: int
    proposed_count: int
    seed: int
    budget_exhausted: bool = False
    wall_time: float = field(default=0.0, compare=False)

    def frequencies(self, query: str) -> dict:
        """Normalized sample frequencies for one query, keyed by raw value."""
        counts: dict = {}
        for value in self.queries.get(query, []):
            key = value if isinstance(value, str) else _value_key(value)
            counts[key] = counts.get(key, 0) + 1
        total = sum(counts.values())
        return {k: c / total for k, c in counts.items()} if total else {}

    def counts(self, query: str) -> dict:
        counts: dict = {}
        for value in self.queries.get(query, []):
            key = value if isinstance(value, str) else _value_key(value)
            counts[key] = counts.get(key, 0) + 1
        return counts

    def with_wall_time(self, wall_time: float) -> "SampleSet":
        return SampleSet(
            model_id=self.model_id,
            queries=self.queries,
            accepted_count=self.accepted_count,
            proposed_count=self.proposed_count,
            seed=self.seed,
            budget_exhausted=self.budget_exhausted,
            wall_time=wall_time,
        )

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "queries": self.queries,
            "accepted_count": self.accepted_count,
            "proposed_count": self.proposed_count,
            "seed": self.seed,
            "budget_exhausted": self.budget_exhausted,
            "wall_time": self.wall_time,
        }

    @staticmethod
    def from_json(d: dict) -> "SampleSet":
        return SampleSet(
            model_id=d["model_id"],
            queries=d["queries"],
            accepted_count=d["accepted_count"],
            proposed_count=d["proposed_count"],
            seed=d["seed"],
            budget_exhausted=d.get("budget_exhausted", False),
            wall_time=d.get("wall_time", 0.0),
        )


def _value_key(value):
    return render_value(value)


def rejection_sample(
    program: Program,
    target_samples: int,
    budget: Budget,
    seed: int,
    model_id: str = "model",
    engine: str = "compiled",
) -> SampleSet:
    """Draw accepted samples until target_samples or budget exhaustion.

    Pre: validate(program) is empty and target_samples >= 1. Deterministic
    for equal (program, target_samples, budget.max_proposals, seed). The
    compiled engine is the default; engine="interpreted" runs the reference
    evaluator (same draw protocol, so identical results)."""
    if target_samples < 1:
        raise ValueError("target_samples must be >= 1")
    run = _make_runner(program, engine)
    rng = rngmod.stream(seed, model_id, "rejection")
    started = time.monotonic()
    deadline = started + budget.max_seconds if budget.max_seconds is not None else None
    query_names = list(program.query_names)
    columns: dict = {q: [] for q in query_names}
    accepted = 0
    proposed = 0
    exhausted = False
    while accepted < target_samples:
        if budget.max_proposals is not None and proposed >= budget.max_proposals:
            exhausted = True
            break
        if deadline is not None and time.monotonic() > deadline:
            exhausted = True
            break
        proposed += 1
        sample = run(rng)
        if sample is None:
            continue
        accepted += 1
        for q in query_names:
            columns[q].append(sample[q])
    return SampleSet(
        model_id=model_id,
        queries=columns,
        accepted_count=accepted,
        proposed_count=proposed,
        seed=seed,
        budget_exhausted=exhausted,
        wall_time=time.monotonic() - started,
    )


def _make_runner(program: Program, engine: str):
    if engine == "compiled":
        try:
            model = compile_program(program)
        except NotCompilable:
            model = None  # legal construct outside the compiled subset
        if model is not None:
            def run(rng):
                try:
                    return model(rng)
                except (TypeError, RecursionError) as exc:
                    raise MedRuntimeError(f"model execution failed: {exc}") from exc

            return run
    if engine not in ("compiled", "interpreted"):
        raise ValueError(f"unknown engine '{engine}'")

    def run(rng):
        outcome = run_once(program, rng)
        return outcome.sample if outcome.accepted else None

    return run
