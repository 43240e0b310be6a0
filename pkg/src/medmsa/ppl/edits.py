"""Structured point edits on model source.

Edits splice text at the target's source span and re-parse, so everything
outside the edit (comments, spacing) survives byte-for-byte and the diff a
reviewer sees is exactly the clinician's change. An edit either yields a
program that parses and validates, or fails atomically.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EditProducesInvalidProgram, EditTargetMissing, MedPplError
from .syntax import Program, parse, render_number
from .validate import validate

EDIT_KINDS = ("ReplaceCondition", "AddCondition", "RemoveCondition", "ReplaceNumericLiteral")


@dataclass(frozen=True)
class Edit:
    """kind selects the target family: condition edits address conditions by
    zero-based index, numeric edits address a literal by its exact source
    span (repeated constants stay unambiguous)."""

    kind: str
    target: int | tuple[int, int] | None = None
    payload: str | float | None = None
    note: str = ""

    def to_json(self) -> dict:
        target = list(self.target) if isinstance(self.target, tuple) else self.target
        return {"kind": self.kind, "target": target, "payload": self.payload, "note": self.note}

    @staticmethod
    def from_json(d: dict) -> "Edit":
        if d.get("kind") not in EDIT_KINDS:
            raise ValueError(f"unknown edit kind {d.get('kind')!r}")
        target = d.get("target")
        if isinstance(target, list):
            target = tuple(target)
        return Edit(kind=d["kind"], target=target, payload=d.get("payload"), note=d.get("note", ""))


def apply_edit(program: Program, edit: Edit) -> Program:
    """Returns a new Program; the input is untouched. Raises EditTargetMissing
    or EditProducesInvalidProgram."""
    source = program.source
    if not source:
        raise EditProducesInvalidProgram("program has no retained source to edit")
    new_source = _splice(program, source, edit)
    try:
        new_program = parse(new_source)
    except MedPplError as exc:
        raise EditProducesInvalidProgram(f"edited source no longer parses: {exc}") from exc
    diagnostics = validate(new_program)
    if diagnostics:
        raise EditProducesInvalidProgram(
            "edited program fails validation", diagnostics=diagnostics
        )
    return new_program


def _splice(program: Program, source: str, edit: Edit) -> str:
    if edit.kind == "ReplaceCondition":
        span = _condition_span(program, edit.target)
        return source[: span.start] + f"condition({edit.payload})" + source[span.end :]
    if edit.kind == "RemoveCondition":
        span = _condition_span(program, edit.target)
        start, end = _expand_to_line(source, span.start, span.end)
        return source[:start] + source[end:]
    if edit.kind == "AddCondition":
        if not isinstance(edit.payload, str) or not edit.payload.strip():
            raise EditProducesInvalidProgram("AddCondition needs a non-empty expression payload")
        ret_span = program.query_return.span
        line_start = source.rfind("\n", 0, ret_span.start) + 1
        indent = source[line_start : ret_span.start]
        if indent.strip():
            indent = ""
        return (
            source[:line_start]
            + f"{indent}condition({edit.payload})\n"
            + source[line_start:]
        )
    if edit.kind == "ReplaceNumericLiteral":
        if not isinstance(edit.target, tuple) or len(edit.target) != 2:
            raise EditTargetMissing("ReplaceNumericLiteral target must be a [start, end] span")
        start, end = edit.target
        literal = next(
            (n for n in program.number_literals() if n.span.start == start and n.span.end == end),
            None,
        )
        if literal is None:
            raise EditTargetMissing(f"no numeric literal at span [{start}, {end})")
        try:
            number = float(edit.payload)
        except (TypeError, ValueError):
            raise EditProducesInvalidProgram(f"payload {edit.payload!r} is not a number") from None
        return source[:start] + render_number(number) + source[end:]
    raise EditTargetMissing(f"unknown edit kind {edit.kind!r}")


def _condition_span(program: Program, index):
    conditions = program.conditions
    if not isinstance(index, int) or not (0 <= index < len(conditions)):
        raise EditTargetMissing(
            f"condition index {index!r} out of range (program has {len(conditions)} conditions)"
        )
    return conditions[index].span


def _expand_to_line(source: str, start: int, end: int) -> tuple[int, int]:
    line_start = source.rfind("\n", 0, start) + 1
    if source[line_start:start].strip():
        line_start = start
    line_end = source.find("\n", end)
    line_end = len(source) if line_end < 0 else line_end + 1
    if source[end : line_end - 1].strip(" \t;"):
        line_end = end
    return line_start, line_end
