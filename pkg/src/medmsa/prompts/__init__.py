"""Prompt assets: versioned text templates with {{PLACEHOLDER}} substitution.

Lines starting with #% are asset metadata and are stripped before the prompt
is sent. The shared few-shot exemplar (a noisy-or medical scenario) is kept
in one file and sliced into its scenario/translation/scratchpad/model blocks.
"""

from __future__ import annotations

import json
from functools import lru_cache
from pathlib import Path

_PROMPT_DIR = Path(__file__).parent


@lru_cache(maxsize=None)
def load_asset(name: str) -> str:
    text = (_PROMPT_DIR / f"{name}.txt").read_text()
    lines = [line for line in text.splitlines() if not line.startswith("#%")]
    return "\n".join(lines).strip() + "\n"


def _fill(template: str, **placeholders: str) -> str:
    out = template
    for key, value in placeholders.items():
        out = out.replace("{{" + key + "}}", value)
    return out


def _block(text: str, start: str, end: str) -> str:
    i = text.index(start)
    j = text.index(end, i) + len(end)
    return text[i:j]


@lru_cache(maxsize=None)
def exemplar_blocks() -> dict:
    text = load_asset("exemplar")
    return {
        "scenario": _block(text, "<START_SCENARIO>", "<END_SCENARIO>"),
        "translation": _block(text, "<START_TRANSLATION>", "<END_TRANSLATION>"),
        "scratchpad": _block(text, "<START_SCRATCHPAD>", "<END_SCRATCHPAD>"),
        "model": _block(text, "<START_MODEL>", "<END_MODEL>"),
    }


def scenario_block(sentences: list[str], queries: list[str]) -> str:
    numbered = "\n".join(f"Query {i + 1}: {q}" for i, q in enumerate(queries))
    return (
        "<START_SCENARIO>\nBACKGROUND\nModel a doctor's office. Patients come "
        "into the doctor's office, and the doctor needs to infer a diagnosis "
        "from their symptoms and a review of the patient's medical history.\n\n"
        "CONDITIONS\n" + "\n".join(sentences) + "\n\nQUERIES\n" + numbered + "\n<END_SCENARIO>"
    )


def render_translate(sentences: list[str], queries: list[str]) -> str:
    ex = exemplar_blocks()
    return _fill(
        load_asset("translate"),
        EXEMPLAR_SCENARIO=ex["scenario"],
        EXEMPLAR_TRANSLATION=ex["translation"],
        SENTENCES="\n".join(sentences),
        QUERIES="\n".join(f"Query {i + 1}: {q}" for i, q in enumerate(queries)),
    )


def render_sketch(sentences: list[str], queries: list[str], translation_block: str) -> str:
    ex = exemplar_blocks()
    return _fill(
        load_asset("sketch"),
        EXEMPLAR_SCENARIO=ex["scenario"],
        EXEMPLAR_TRANSLATION=ex["translation"],
        EXEMPLAR_SCRATCHPAD=ex["scratchpad"],
        SCENARIO=scenario_block(sentences, queries),
        TRANSLATION=translation_block,
    )


def render_code(sentences: list[str], queries: list[str], translation_block: str, scratchpad_block: str) -> str:
    ex = exemplar_blocks()
    return _fill(
        load_asset("code"),
        EXEMPLAR_SCENARIO=ex["scenario"],
        EXEMPLAR_TRANSLATION=ex["translation"],
        EXEMPLAR_SCRATCHPAD=ex["scratchpad"],
        EXEMPLAR_MODEL=ex["model"],
        SCENARIO=scenario_block(sentences, queries),
        TRANSLATION=translation_block,
        SCRATCHPAD=scratchpad_block,
    )


def render_score(sentences: list[str], queries: list[str], kind: str, artifact: str) -> str:
    return _fill(
        load_asset("score"),
        SCENARIO=scenario_block(sentences, queries),
        KIND=kind,
        ARTIFACT=artifact,
    )


def render_canonicalize(categories: list[str]) -> str:
    return _fill(load_asset("canonicalize"), CATEGORIES=json.dumps(list(categories)))
