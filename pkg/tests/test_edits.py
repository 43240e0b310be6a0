import pytest

from medmsa.ppl import (
    Edit,
    EditProducesInvalidProgram,
    EditTargetMissing,
    apply_edit,
    enumerate_program,
    parse,
)


@pytest.fixture()
def v2_program(repo):
    return parse((repo / "data/programs/clean/sean_vignette2.medppl").read_text())


def test_replace_condition_flips_exercise_direction(v2_program):
    before = enumerate_program(v2_program).queries["query2"].get("heart_attack", 0.0)
    edited = apply_edit(
        v2_program, Edit(kind="ReplaceCondition", target=3, payload="does_exercise('sean')")
    )
    after = enumerate_program(edited).queries["query2"].get("heart_attack", 0.0)
    assert after < before
    assert "does_exercise('sean')" in edited.source
    assert "!does_exercise('sean')" not in edited.source


def test_remove_then_add_restores_posterior(v2_program):
    baseline = enumerate_program(v2_program).queries
    condition_text = "!does_exercise('sean')"
    removed = apply_edit(v2_program, Edit(kind="RemoveCondition", target=3))
    assert len(removed.conditions) == len(v2_program.conditions) - 1
    restored = apply_edit(removed, Edit(kind="AddCondition", payload=condition_text))
    assert enumerate_program(restored).queries == baseline


def test_replace_numeric_literal_increases_prior(repo):
    source = (repo / "data/programs/clean/exercise_prior.medppl").read_text()
    program = parse(source)
    target = next(n for n in program.number_literals() if n.value == 0.0001)
    before = enumerate_program(program).queries["query1"].get("true", 0.0)
    edited = apply_edit(
        program,
        Edit(kind="ReplaceNumericLiteral", target=(target.span.start, target.span.end), payload=0.01),
    )
    after = enumerate_program(edited).queries["query1"].get("true", 0.0)
    assert after > before


def test_edit_leaves_original_untouched(v2_program):
    source_before = v2_program.source
    apply_edit(v2_program, Edit(kind="RemoveCondition", target=0))
    assert v2_program.source == source_before
    assert len(v2_program.conditions) == 4


def test_edit_target_missing(v2_program):
    with pytest.raises(EditTargetMissing):
        apply_edit(v2_program, Edit(kind="ReplaceCondition", target=99, payload="true"))
    with pytest.raises(EditTargetMissing):
        apply_edit(v2_program, Edit(kind="ReplaceNumericLiteral", target=(1, 2), payload=0.5))
    with pytest.raises(EditTargetMissing):
        apply_edit(v2_program, Edit(kind="SwapCondition", target=0, payload="true"))


def test_edit_producing_invalid_program_fails_atomically(v2_program):
    with pytest.raises(EditProducesInvalidProgram):
        apply_edit(v2_program, Edit(kind="ReplaceCondition", target=0, payload="no_such_fn('sean')"))
    with pytest.raises(EditProducesInvalidProgram):
        apply_edit(v2_program, Edit(kind="AddCondition", payload="flip(0.5,"))
    # numeric edit making a literal flip probability invalid is caught by validate
    program = parse("return {q: flip(0.5)}")
    literal = program.number_literals()[0]
    with pytest.raises(EditProducesInvalidProgram):
        apply_edit(
            program,
            Edit(kind="ReplaceNumericLiteral", target=(literal.span.start, literal.span.end), payload=1.5),
        )


def test_textual_splice_preserves_comments(v2_program):
    src = "// keep me\nvar x = flip(0.5)\ncondition(x)\nreturn {q: x}\n"
    program = parse(src)
    edited = apply_edit(program, Edit(kind="ReplaceCondition", target=0, payload="!x"))
    assert edited.source.startswith("// keep me\n")
    assert "condition(!x)" in edited.source


def test_add_condition_lands_before_return():
    src = "var x = flip(0.5)\nreturn {q: x}\n"
    edited = apply_edit(parse(src), Edit(kind="AddCondition", payload="x"))
    assert edited.source.index("condition(x)") < edited.source.index("return")
    assert len(edited.conditions) == 1


def test_edit_json_round_trip():
    edit = Edit(kind="ReplaceNumericLiteral", target=(10, 14), payload=0.25, note="what if")
    assert Edit.from_json(edit.to_json()) == edit
    with pytest.raises(ValueError):
        Edit.from_json({"kind": "Nonsense"})
