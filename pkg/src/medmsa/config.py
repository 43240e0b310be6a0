"""Pipeline configuration: one dataclass, serialized into every run manifest."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path


@dataclass(frozen=True)
class PipelineConfig:
    # LM access
    backend: str = "replay"  # http | replay | record
    base_url: str = ""
    model_name: str = ""
    fixture_dir: str = ""
    request_timeout: float = 120.0

    # candidate generation (counts per candidate slot)
    n_translations: int = 4
    n_sketches: int = 3
    share_translation: bool = False

    # checks
    semantic_threshold: float = 0.3
    init_budget_seconds: float = 90.0
    init_budget_max_proposals: int | None = None

    # inference
    samples_per_model: int = 5000
    sampling_max_proposals: int = 5_000_000
    sampling_max_seconds: float | None = None

    # ensembling / canonicalization
    ensemble_method: str = "equal"  # only "equal" is implemented
    overrides_path: str = ""

    # service
    cors_origin: str = ""

    # artifact hygiene: zero recorded times and derive run ids from inputs so
    # replay runs are byte-reproducible. None = on iff backend is replay.
    deterministic_artifacts: bool | None = None

    def deterministic(self) -> bool:
        if self.deterministic_artifacts is None:
            return self.backend == "replay"
        return self.deterministic_artifacts

    def to_json(self) -> dict:
        return asdict(self)

    @staticmethod
    def from_json(d: dict) -> "PipelineConfig":
        known = {f for f in PipelineConfig.__dataclass_fields__}
        return PipelineConfig(**{k: v for k, v in d.items() if k in known})

    @staticmethod
    def load(path: str | Path) -> "PipelineConfig":
        return PipelineConfig.from_json(json.loads(Path(path).read_text()))

    def with_overrides(self, **kwargs) -> "PipelineConfig":
        return replace(self, **kwargs)

    def content_hash(self) -> str:
        canonical = json.dumps(self.to_json(), sort_keys=True)
        return hashlib.blake2b(canonical.encode(), digest_size=8).hexdigest()
