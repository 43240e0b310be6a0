"""On-disk persistence: one directory per run, plain JSON plus MedPPL source.

The run directory is the audit trail: everything the service or CLI reports
is reproducible from these files alone. Writes are atomic (temp + rename)
and the manifest is written last, so a manifest's presence marks a complete
run. Completed run files are never modified afterward; interventions only
add files under interventions/.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

from .canonicalize import CategoryMapping
from .config import PipelineConfig
from .differential import DifferentialDistribution
from .ppl import Diagnostic, SampleSet

SCHEMA_VERSION = 1

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


class StoreError(Exception):
    pass


class DuplicateRunId(StoreError):
    pass


class IncompleteRun(StoreError):
    pass


class SchemaVersionMismatch(StoreError):
    pass


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    vignette_id: str
    k: int
    seed: int
    schema_version: int
    started_at: float
    finished_at: float
    candidate_summaries: tuple
    no_valid_models: bool
    config: PipelineConfig

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "vignette_id": self.vignette_id,
            "k": self.k,
            "seed": self.seed,
            "schema_version": self.schema_version,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "candidates": list(self.candidate_summaries),
            "no_valid_models": self.no_valid_models,
            "config": self.config.to_json(),
        }

    @staticmethod
    def from_json(d: dict) -> "RunManifest":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"manifest schema {d.get('schema_version')} != supported {SCHEMA_VERSION}"
            )
        return RunManifest(
            run_id=d["run_id"],
            vignette_id=d["vignette_id"],
            k=d["k"],
            seed=d["seed"],
            schema_version=d["schema_version"],
            started_at=d["started_at"],
            finished_at=d["finished_at"],
            candidate_summaries=tuple(d["candidates"]),
            no_valid_models=d["no_valid_models"],
            config=PipelineConfig.from_json(d["config"]),
        )


@dataclass(frozen=True)
class RunListing:
    runs: tuple
    incomplete: int  # directories that look like runs but lack a manifest


def _base32(data: bytes) -> str:
    value = int.from_bytes(data, "big")
    chars = []
    bits = len(data) * 8
    for _ in range((bits + 4) // 5):
        chars.append(_CROCKFORD[value & 0x1F])
        value >>= 5
    return "".join(reversed(chars))


def make_run_id(
    vignette_id: str, k: int, seed: int, config: PipelineConfig, deterministic: bool
) -> str:
    """ULID-style sortable id. Deterministic mode derives both halves from
    the run inputs so identical runs get identical ids (and directories)."""
    if deterministic:
        ts_ms = 0
        entropy = hashlib.blake2b(
            f"{vignette_id}|{k}|{seed}|{config.content_hash()}".encode(), digest_size=10
        ).digest()
    else:
        import time

        ts_ms = int(time.time() * 1000)
        entropy = os.urandom(10)
    ts_part = _base32(ts_ms.to_bytes(6, "big"))[-10:]
    return ts_part + _base32(entropy)


def dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def dump_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def load_json(path: Path):
    return json.loads(path.read_text())


def persist_run(run, root: str | Path) -> Path:
    """Write a complete SynthesisRun. Raises DuplicateRunId if the directory
    already exists."""
    root = Path(root)
    run_dir = root / run.run_id
    if run_dir.exists():
        raise DuplicateRunId(f"run directory {run_dir} already exists")
    run_dir.mkdir(parents=True)

    dump_json(run_dir / "vignette.json", run.vignette.to_json())
    for candidate in run.candidates:
        cdir = run_dir / "candidates" / str(candidate.index)
        if candidate.translation is not None:
            dump_json(cdir / "translation.json", candidate.translation.to_json())
        if candidate.sketch is not None:
            dump_json(cdir / "sketch.json", candidate.sketch.to_json())
        dump_text(cdir / "model.medppl", candidate.source)
        dump_text(cdir / "model.patched.medppl", candidate.patched_source)
        dump_json(
            cdir / "checks.json",
            {
                "status": candidate.status.value,
                "semantic_score": candidate.semantic_score,
                "diagnostics": [d.to_json() for d in candidate.diagnostics],
                "lm_calls": candidate.lm_calls,
                "init_seconds": candidate.init_seconds,
                "init_proposals": candidate.init_proposals,
            },
        )
        if candidate.sample_set is not None:
            dump_json(cdir / "samples.json", candidate.sample_set.to_json())
    if run.mapping is not None:
        dump_json(run_dir / "mapping.json", run.mapping.to_json())
    for query, dist in run.differentials.items():
        payload = dist.to_json()
        payload["schema_version"] = SCHEMA_VERSION
        dump_json(run_dir / "differential" / f"{query}.json", payload)

    manifest = RunManifest(
        run_id=run.run_id,
        vignette_id=run.vignette.id,
        k=run.k,
        seed=run.seed,
        schema_version=SCHEMA_VERSION,
        started_at=run.started_at,
        finished_at=run.finished_at,
        candidate_summaries=tuple(c.summary() for c in run.candidates),
        no_valid_models=run.no_valid_models,
        config=run.config,
    )
    dump_json(run_dir / "manifest.json", manifest.to_json())
    return run_dir


def load_manifest(run_dir: str | Path) -> RunManifest:
    path = Path(run_dir) / "manifest.json"
    if not path.is_file():
        raise IncompleteRun(f"{run_dir} has no manifest (write was interrupted or still running)")
    return RunManifest.from_json(load_json(path))


def load_run(run_dir: str | Path):
    """Inverse of persist_run; returns a SynthesisRun structurally equal to
    the persisted one."""
    from .synthesis import (
        CandidateStatus,
        ModelCandidate,
        Sketch,
        SynthesisRun,
        Translation,
        Vignette,
    )

    run_dir = Path(run_dir)
    manifest = load_manifest(run_dir)
    vignette = Vignette.from_json(load_json(run_dir / "vignette.json"))

    candidates = []
    for index in range(1, manifest.k + 1):
        cdir = run_dir / "candidates" / str(index)
        checks = load_json(cdir / "checks.json")
        translation = None
        if (cdir / "translation.json").is_file():
            translation = Translation.from_json(load_json(cdir / "translation.json"))
        sketch = None
        if (cdir / "sketch.json").is_file():
            sketch = Sketch.from_json(load_json(cdir / "sketch.json"))
        sample_set = None
        if (cdir / "samples.json").is_file():
            sample_set = SampleSet.from_json(load_json(cdir / "samples.json"))
        candidates.append(
            ModelCandidate(
                index=index,
                translation=translation,
                sketch=sketch,
                source=(cdir / "model.medppl").read_text(),
                patched_source=(cdir / "model.patched.medppl").read_text(),
                semantic_score=checks["semantic_score"],
                status=CandidateStatus(checks["status"]),
                diagnostics=tuple(Diagnostic.from_json(d) for d in checks["diagnostics"]),
                sample_set=sample_set,
                lm_calls=checks.get("lm_calls", {}),
                init_seconds=checks.get("init_seconds", 0.0),
                init_proposals=checks.get("init_proposals", 0),
            )
        )

    mapping = None
    if (run_dir / "mapping.json").is_file():
        mapping = CategoryMapping.from_json(load_json(run_dir / "mapping.json"))
    differentials = {}
    diff_dir = run_dir / "differential"
    if diff_dir.is_dir():
        for path in sorted(diff_dir.glob("*.json")):
            payload = load_json(path)
            differentials[payload["query"]] = DifferentialDistribution.from_json(payload)

    return SynthesisRun(
        run_id=manifest.run_id,
        vignette=vignette,
        k=manifest.k,
        seed=manifest.seed,
        candidates=tuple(candidates),
        config=manifest.config,
        mapping=mapping,
        differentials=differentials,
        started_at=manifest.started_at,
        finished_at=manifest.finished_at,
    )


def list_runs(root: str | Path) -> RunListing:
    """Manifests of complete runs under root, sorted by run id. Directories
    without a manifest count as incomplete; foreign files are ignored."""
    root = Path(root)
    if not root.is_dir():
        return RunListing(runs=(), incomplete=0)
    runs = []
    incomplete = 0
    for entry in sorted(root.iterdir()):
        if not entry.is_dir():
            continue
        manifest_path = entry / "manifest.json"
        if manifest_path.is_file():
            try:
                runs.append(RunManifest.from_json(load_json(manifest_path)))
            except (SchemaVersionMismatch, KeyError, json.JSONDecodeError):
                incomplete += 1
        elif (entry / "vignette.json").is_file() or (entry / "candidates").is_dir():
            incomplete += 1
    return RunListing(runs=tuple(runs), incomplete=incomplete)


def tree_hash(path: str | Path) -> str:
    """SHA-256 over sorted (relative path, file bytes); byte-identical
    directories hash equal."""
    path = Path(path)
    digest = hashlib.sha256()
    for file in sorted(p for p in path.rglob("*") if p.is_file()):
        digest.update(str(file.relative_to(path)).encode())
        digest.update(b"\0")
        digest.update(file.read_bytes())
        digest.update(b"\0")
    return digest.hexdigest()
