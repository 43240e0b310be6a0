"""Equal-weight ensembling of canonicalized per-model sample distributions.

Each valid model's accepted samples are normalized into a per-model
distribution first, then the distributions are averaged with weight
1/n_models. With full equal sample counts this is identical to raw pooling;
with unequal accepted counts it keeps each model's vote equal. Categories a
model never sampled contribute zero from that model (no smoothing).
"""

from __future__ import annotations

from dataclasses import dataclass

from .canonicalize import CategoryMapping, apply_mapping
from .ppl.sample import SampleSet

CATCH_ALL = "other"


class NoValidModels(Exception):
    pass


@dataclass(frozen=True)
class DifferentialEntry:
    category: str
    probability: float
    support: int  # how many valid models ever sampled this category
    is_catch_all: bool

    def to_json(self) -> dict:
        return {
            "category": self.category,
            "probability": self.probability,
            "support": self.support,
            "is_catch_all": self.is_catch_all,
        }


@dataclass(frozen=True)
class DifferentialDistribution:
    """Entries sorted by descending probability, ties lexicographic. coverage
    is the probability mass the entries carry (1.0 unless truncated)."""

    query: str
    question: str
    n_models: int
    total_samples: int
    entries: tuple

    @property
    def coverage(self) -> float:
        return sum(e.probability for e in self.entries)

    def probability(self, category: str) -> float:
        for entry in self.entries:
            if entry.category == category:
                return entry.probability
        return 0.0

    def categories(self) -> tuple:
        return tuple(e.category for e in self.entries)

    def to_json(self) -> dict:
        return {
            "query": self.query,
            "question": self.question,
            "n_models": self.n_models,
            "total_samples": self.total_samples,
            "coverage": self.coverage,
            "entries": [e.to_json() for e in self.entries],
        }

    @staticmethod
    def from_json(d: dict) -> "DifferentialDistribution":
        return DifferentialDistribution(
            query=d["query"],
            question=d.get("question", ""),
            n_models=d["n_models"],
            total_samples=d["total_samples"],
            entries=tuple(
                DifferentialEntry(
                    category=e["category"],
                    probability=e["probability"],
                    support=e["support"],
                    is_catch_all=e["is_catch_all"],
                )
                for e in d["entries"]
            ),
        )


def ensemble_sample_sets(
    sample_sets: list[SampleSet],
    query: str,
    mapping: CategoryMapping,
    question: str = "",
) -> DifferentialDistribution:
    """Equal-weight average of the canonicalized per-model distributions."""
    sets = [s for s in sample_sets if s is not None and s.accepted_count > 0]
    if not sets:
        raise NoValidModels(f"no valid models carry samples for {query!r}")
    n_models = len(sets)
    weight = 1.0 / n_models
    mass: dict[str, float] = {}
    support: dict[str, int] = {}
    total_samples = 0
    for sample_set in sets:
        canonical = apply_mapping(sample_set, mapping, query)
        counts: dict[str, int] = {}
        for value in canonical.queries[query]:
            counts[value] = counts.get(value, 0) + 1
        model_total = sum(counts.values())
        total_samples += model_total
        for category, count in counts.items():
            mass[category] = mass.get(category, 0.0) + weight * (count / model_total)
            support[category] = support.get(category, 0) + 1
    entries = tuple(
        DifferentialEntry(
            category=category,
            probability=probability,
            support=support[category],
            is_catch_all=category == CATCH_ALL,
        )
        for category, probability in sorted(mass.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return DifferentialDistribution(
        query=query,
        question=question,
        n_models=n_models,
        total_samples=total_samples,
        entries=entries,
    )


def ensemble(run, query: str, mapping: CategoryMapping, question: str = "") -> DifferentialDistribution:
    """Ensemble over a run's valid models (anything with valid_models())."""
    return ensemble_sample_sets(
        [c.sample_set for c in run.valid_models()], query, mapping, question=question
    )


def top_n(dist: DifferentialDistribution, n: int) -> DifferentialDistribution:
    """First n entries by the sort order. Probabilities are NOT renormalized;
    the dropped mass shows up as coverage < 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return DifferentialDistribution(
        query=dist.query,
        question=dist.question,
        n_models=dist.n_models,
        total_samples=dist.total_samples,
        entries=dist.entries[:n],
    )


def render_bars(dist: DifferentialDistribution, width: int = 40) -> str:
    """Plain-text horizontal bar chart for the CLI."""
    if not dist.entries:
        return "(empty distribution)"
    longest = max(len(e.category) for e in dist.entries)
    lines = []
    for entry in dist.entries:
        bar = "#" * max(1, round(entry.probability * width)) if entry.probability > 0 else ""
        flag = " [catch-all]" if entry.is_catch_all else ""
        lines.append(
            f"{entry.category.ljust(longest)}  {entry.probability * 100:6.2f}%  {bar}"
            f"  ({entry.support}/{dist.n_models} models){flag}"
        )
    if dist.coverage < 0.9999999:
        lines.append(f"coverage: {dist.coverage * 100:.2f}% of probability mass shown")
    return "\n".join(lines)
