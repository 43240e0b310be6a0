"""Category canonicalization: merge surface-level synonymous answer strings.

Different models name the same condition differently ("collapsed lung" vs
"pneumothorax", "heart_attack" vs "heart attack"). An LM proposes the
grouping over normalized raw categories; a manual overrides file wins over
the LM; anything the LM missed maps to itself. The catch-all "other" is kept
as its own flagged category, never redistributed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import prompts
from .lm import LmBackend, LmRequest, Stage, fixture_key
from .ppl.sample import SampleSet
from .ppl.values import render_value

# Canonical names an LM must not silently remap (prompt contract).
PROTECTED = ("heart attack",)
CATCH_ALL = "other"


@dataclass(frozen=True)
class CategoryMapping:
    """raw string -> canonical string, with per-entry provenance in
    {"LM", "Override", "Identity"}. Canonical names are normalized (lowercase,
    no underscores) and map to themselves."""

    entries: dict
    provenance: dict
    source_prompt_hash: str = ""
    warnings: tuple = ()

    def canonical(self, raw: str) -> str:
        if raw not in self.entries:
            raise UnmappedCategory(raw)
        return self.entries[raw]

    def canonical_names(self) -> set:
        return set(self.entries.values())

    def is_catch_all(self, canonical_name: str) -> bool:
        return canonical_name == CATCH_ALL

    def to_json(self) -> dict:
        return {
            "entries": dict(sorted(self.entries.items())),
            "provenance": dict(sorted(self.provenance.items())),
            "source_prompt_hash": self.source_prompt_hash,
            "warnings": list(self.warnings),
        }

    @staticmethod
    def from_json(d: dict) -> "CategoryMapping":
        return CategoryMapping(
            entries=dict(d["entries"]),
            provenance=dict(d["provenance"]),
            source_prompt_hash=d.get("source_prompt_hash", ""),
            warnings=tuple(d.get("warnings", ())),
        )


class UnmappedCategory(Exception):
    """A sample value was missing from the mapping; build_mapping saw every
    category, so this indicates a pipeline bug."""

    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"category {raw!r} is not in the mapping")


def normalize(raw: str) -> str:
    return " ".join(raw.replace("_", " ").strip().lower().split())


def load_overrides(path: str | Path) -> dict:
    if not path:
        return {}
    return {str(k): str(v) for k, v in json.loads(Path(path).read_text()).items()}


def build_mapping(raw_categories: set, lm: LmBackend, overrides: dict | None = None) -> CategoryMapping:
    """Normalize raws, ask the LM for the synonym grouping, apply overrides
    last. Unparsable LM output degrades to an all-identity mapping with a
    warning flag; it never aborts a run."""
    if not raw_categories:
        raise ValueError("raw_categories must be non-empty")
    overrides = overrides or {}
    raws = sorted(raw_categories)
    normalized = {raw: normalize(raw) for raw in raws}
    normal_set = sorted(set(normalized.values()))

    prompt = prompts.render_canonicalize(normal_set)
    warnings: list[str] = []
    lm_map: dict = {}
    response = lm.complete(LmRequest(stage=Stage.CANONICALIZE, prompt=prompt))
    try:
        parsed = _extract_json_object(response.text)
    except ValueError as exc:
        warnings.append(f"mapping unparsable, falling back to identity: {exc}")
        parsed = {}
    for key, value in parsed.items():
        if not isinstance(key, str) or not isinstance(value, str):
            warnings.append(f"non-string mapping entry {key!r}: {value!r} ignored")
            continue
        lm_map[normalize(key)] = normalize(value)

    allowed_targets = set(normal_set)
    entries: dict = {}
    provenance: dict = {}
    for raw in raws:
        norm = normalized[raw]
        target = lm_map.get(norm)
        source = "LM"
        if target is None:
            target, source = norm, "Identity"
        elif target not in allowed_targets:
            warnings.append(f"LM invented category {target!r} for {norm!r}; kept identity")
            target, source = norm, "Identity"
        elif norm in PROTECTED and target != norm:
            warnings.append(f"LM remapped protected category {norm!r}; kept identity")
            target, source = norm, "Identity"
        entries[raw] = target
        provenance[raw] = source

    # Overrides win, matching on the normalized form of the raw.
    norm_overrides = {normalize(k): normalize(v) for k, v in overrides.items()}
    for raw in list(entries):
        target = norm_overrides.get(normalized[raw] if raw in normalized else normalize(raw))
        if target is not None:
            entries[raw] = target
            provenance[raw] = "Override"

    # Idempotence: every canonical target maps to itself.
    for target in sorted(set(entries.values())):
        if target not in entries:
            entries[target] = target
            provenance[target] = "Identity"
        elif entries[target] != target:
            entries[target] = target

    return CategoryMapping(
        entries=entries,
        provenance=provenance,
        source_prompt_hash=fixture_key(Stage.CANONICALIZE, prompt),
        warnings=tuple(warnings),
    )


def extend_mapping(
    mapping: CategoryMapping, new_raws: set, lm: LmBackend, overrides: dict | None = None
) -> CategoryMapping:
    """Mapping for categories that appear after an intervention. Existing
    entries win; only genuinely new raws go to the LM."""
    unseen = {r for r in new_raws if r not in mapping.entries}
    if not unseen:
        return mapping
    extension = build_mapping(unseen | mapping.canonical_names(), lm, overrides)
    entries = dict(extension.entries)
    provenance = dict(extension.provenance)
    entries.update(mapping.entries)
    provenance.update(mapping.provenance)
    return CategoryMapping(
        entries=entries,
        provenance=provenance,
        source_prompt_hash=extension.source_prompt_hash,
        warnings=mapping.warnings + extension.warnings,
    )


def apply_mapping(sample_set: SampleSet, mapping: CategoryMapping, query: str) -> SampleSet:
    """New SampleSet with the query's values replaced by canonical strings.
    Booleans stringify to "true"/"false"; counts are preserved exactly."""
    values = sample_set.queries.get(query)
    if values is None:
        raise KeyError(f"sample set has no query {query!r}")
    canonical: list = []
    for value in values:
        if type(value) is bool:
            canonical.append("true" if value else "false")
        elif isinstance(value, str):
            canonical.append(mapping.canonical(value))
        else:
            canonical.append(render_value(value))
    queries = dict(sample_set.queries)
    queries[query] = canonical
    return SampleSet(
        model_id=sample_set.model_id,
        queries=queries,
        accepted_count=sample_set.accepted_count,
        proposed_count=sample_set.proposed_count,
        seed=sample_set.seed,
        budget_exhausted=sample_set.budget_exhausted,
        wall_time=sample_set.wall_time,
    )


def _extract_json_object(text: str) -> dict:
    """Pull one JSON object out of possibly chatty LM output."""
    start = text.find("{")
    if start < 0:
        raise ValueError("no JSON object in output")
    depth = 0
    for i in range(start, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                blob = text[start : i + 1]
                parsed = json.loads(blob)
                if not isinstance(parsed, dict):
                    raise ValueError("JSON payload is not an object")
                return parsed
    raise ValueError("unbalanced JSON object in output")
