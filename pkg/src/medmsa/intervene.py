"""Clinician what-if loop: apply a point edit to one synthesized model, rerun
inference, and report before/after distributions.

The base model is immutable; the edit produces a new persisted version under
interventions/ with its parent recorded, so replaying the edit chain from the
root reproduces any version's source exactly. Only the edited model is
re-sampled; the after-ensemble substitutes its distribution for its parent's.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from pathlib import Path

from . import canonicalize as canon
from . import rng, store
from .differential import DifferentialDistribution, NoValidModels, ensemble_sample_sets
from .lm import LmBackend
from .ppl import Budget, Edit, SampleSet, apply_edit, parse, rejection_sample
from .synthesis import CandidateStatus, SynthesisRun

_VERSION_LOCK = threading.Lock()
_VERSION_RE = re.compile(r"v(\d+)$")


class InterventionError(Exception):
    pass


class ModelNotCompiled(InterventionError):
    pass


class ModelNotFound(InterventionError):
    pass


@dataclass(frozen=True)
class InterventionResult:
    base_model_id: str
    new_version_id: str
    edit: Edit
    seed: int
    budget_exhausted: bool
    before: dict  # query -> DifferentialDistribution (base model only)
    after: dict
    before_ensemble: dict
    after_ensemble: dict

    def to_json(self) -> dict:
        dists = lambda d: {q: dist.to_json() for q, dist in d.items()}
        return {
            "base_model_id": self.base_model_id,
            "new_version_id": self.new_version_id,
            "edit": self.edit.to_json(),
            "seed": self.seed,
            "budget_exhausted": self.budget_exhausted,
            "before": dists(self.before),
            "after": dists(self.after),
            "before_ensemble": dists(self.before_ensemble),
            "after_ensemble": dists(self.after_ensemble),
        }

    @staticmethod
    def from_json(d: dict) -> "InterventionResult":
        dists = lambda payload: {
            q: DifferentialDistribution.from_json(v) for q, v in payload.items()
        }
        return InterventionResult(
            base_model_id=d["base_model_id"],
            new_version_id=d["new_version_id"],
            edit=Edit.from_json(d["edit"]),
            seed=d["seed"],
            budget_exhausted=d["budget_exhausted"],
            before=dists(d["before"]),
            after=dists(d["after"]),
            before_ensemble=dists(d["before_ensemble"]),
            after_ensemble=dists(d["after_ensemble"]),
        )


def _resolve_base(run: SynthesisRun, run_dir: Path, model_ref):
    """-> (base_id, source, sample_set, root_candidate_index, base_mapping)"""
    ref = str(model_ref)
    if ref.isdigit():
        index = int(ref)
        candidate = next((c for c in run.candidates if c.index == index), None)
        if candidate is None:
            raise ModelNotFound(f"no candidate {index} in run {run.run_id}")
        if candidate.status is not CandidateStatus.COMPILED or candidate.sample_set is None:
            raise ModelNotCompiled(f"candidate {index} has status {candidate.status.value}")
        mapping = run.mapping or canon.CategoryMapping(entries={}, provenance={})
        return f"candidate:{index}", candidate.patched_source, candidate.sample_set, index, mapping
    match = _VERSION_RE.fullmatch(ref)
    if match:
        vdir = run_dir / "interventions" / ref
        if not vdir.is_dir():
            raise ModelNotFound(f"no intervention version {ref} in run {run.run_id}")
        meta = store.load_json(vdir / "meta.json")
        sample_set = SampleSet.from_json(store.load_json(vdir / "samples.json"))
        source = (vdir / "model.medppl").read_text()
        mapping = canon.CategoryMapping.from_json(store.load_json(vdir / "mapping.json"))
        return f"intervention:{ref}", source, sample_set, int(meta["root_candidate"]), mapping
    raise ModelNotFound(f"model reference {model_ref!r} is neither a candidate index nor v<N>")


def _next_version(run_dir: Path) -> str:
    versions_dir = run_dir / "interventions"
    highest = 0
    if versions_dir.is_dir():
        for entry in versions_dir.iterdir():
            match = _VERSION_RE.fullmatch(entry.name)
            if match:
                highest = max(highest, int(match.group(1)))
    return f"v{highest + 1}"


def _distributions(sample_sets, queries, questions, mapping) -> dict:
    out = {}
    for query, question in zip(queries, questions):
        try:
            out[query] = ensemble_sample_sets(sample_sets, query, mapping, question=question)
        except NoValidModels:
            out[query] = DifferentialDistribution(
                query=query, question=question, n_models=0, total_samples=0, entries=()
            )
    return out


def intervene(
    run: SynthesisRun,
    run_dir: str | Path,
    model_ref,
    edit: Edit,
    seed: int,
    lm: LmBackend,
) -> InterventionResult:
    """Apply edit to one Compiled model, re-run inference with a fresh seed
    stream, and persist the new version. The original run files are never
    touched."""
    run_dir = Path(run_dir)
    base_id, base_source, base_samples, root_candidate, base_mapping = _resolve_base(
        run, run_dir, model_ref
    )

    program = parse(base_source)
    new_program = apply_edit(program, edit)  # EditTargetMissing / EditProducesInvalidProgram

    with _VERSION_LOCK:
        version_id = _next_version(run_dir)
        vdir = run_dir / "interventions" / version_id
        vdir.mkdir(parents=True)

    config = run.config
    budget = Budget(
        max_seconds=config.sampling_max_seconds, max_proposals=config.sampling_max_proposals
    )
    new_samples = rejection_sample(
        new_program,
        config.samples_per_model,
        budget,
        seed=rng.derive_seed(seed, "intervention", version_id),
        model_id=version_id,
    )
    if config.deterministic():
        new_samples = new_samples.with_wall_time(0.0)

    new_raws = {
        value
        for query in run.vignette.query_names()
        for value in new_samples.queries.get(query, [])
        if isinstance(value, str)
    }
    extended = canon.extend_mapping(
        base_mapping, new_raws, lm, canon.load_overrides(config.overrides_path)
    )

    queries = run.vignette.query_names()
    questions = run.vignette.queries
    before = _distributions([base_samples], queries, questions, base_mapping)
    after = _distributions([new_samples], queries, questions, extended)

    before_ensemble = dict(run.differentials)
    substituted = [
        (new_samples if c.index == root_candidate else c.sample_set) for c in run.valid_models()
    ]
    after_ensemble = _distributions(substituted, queries, questions, extended)

    result = InterventionResult(
        base_model_id=base_id,
        new_version_id=version_id,
        edit=edit,
        seed=seed,
        budget_exhausted=new_samples.budget_exhausted or new_samples.accepted_count == 0,
        before=before,
        after=after,
        before_ensemble=before_ensemble,
        after_ensemble=after_ensemble,
    )

    store.dump_text(vdir / "model.medppl", new_program.source)
    store.dump_json(vdir / "edit.json", edit.to_json())
    store.dump_json(vdir / "samples.json", new_samples.to_json())
    store.dump_json(vdir / "mapping.json", extended.to_json())
    store.dump_json(
        vdir / "meta.json",
        {
            "version": version_id,
            "parent": base_id,
            "root_candidate": root_candidate,
            "seed": seed,
            "schema_version": store.SCHEMA_VERSION,
        },
    )
    store.dump_json(vdir / "result.json", result.to_json())
    return result


def list_interventions(run_dir: str | Path) -> list[dict]:
    """Version metadata plus edit, oldest first."""
    run_dir = Path(run_dir)
    versions_dir = run_dir / "interventions"
    if not versions_dir.is_dir():
        return []
    out = []
    entries = sorted(
        (e for e in versions_dir.iterdir() if _VERSION_RE.fullmatch(e.name)),
        key=lambda e: int(_VERSION_RE.fullmatch(e.name).group(1)),
    )
    for entry in entries:
        meta = store.load_json(entry / "meta.json")
        meta["edit"] = store.load_json(entry / "edit.json")
        out.append(meta)
    return out


def replay_chain(run: SynthesisRun, run_dir: str | Path, version_id: str) -> str:
    """Re-derive a version's source by replaying its edit chain from the root
    candidate; used to audit lineage."""
    run_dir = Path(run_dir)
    chain = []
    ref = f"intervention:{version_id}"
    while ref.startswith("intervention:"):
        vid = ref.split(":", 1)[1]
        vdir = run_dir / "interventions" / vid
        meta = store.load_json(vdir / "meta.json")
        edit = Edit.from_json(store.load_json(vdir / "edit.json"))
        chain.append(edit)
        ref = meta["parent"]
    index = int(ref.split(":", 1)[1])
    candidate = next(c for c in run.candidates if c.index == index)
    program = parse(candidate.patched_source)
    for edit in reversed(chain):
        program = apply_edit(program, edit)
    return program.source
