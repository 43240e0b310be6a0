from medmsa.ppl import parse, validate


def codes(program_source: str) -> list[str]:
    return [d.code for d in validate(parse(program_source))]


def test_marie_exemplar_validates_clean(marie_source):
    assert validate(parse(marie_source)) == []


def test_flip_arity_mismatch():
    assert "ArityMismatch" in codes("return {q: flip(0.2, 0.3)}")


def test_categorical_length_mismatch():
    src = "return {q: categorical({ps: [1, 2, 3], vs: ['a', 'b']})}"
    assert "LengthMismatch" in codes(src)


def test_categorical_key_check():
    assert "BadArgument" in codes("return {q: categorical({ps: [1], weights: [1]})}")


def test_flip_literal_probability_range():
    assert "BadArgument" in codes("return {q: flip(1.5)}")


def test_gaussian_sigma_check():
    assert "BadArgument" in codes("return {q: gaussian(0, 0) > 1}")


def test_missing_return_in_branch():
    src = (
        "var f = function(p){\n"
        "  if (p > 0) {\n    return 1\n  }\n"
        "}\n"
        "return {q: f(1)}"
    )
    assert "MissingReturn" in codes(src)


def test_if_else_chain_with_full_returns_is_clean():
    src = (
        "var f = function(p){\n"
        "  if (p > 1) {\n    return 'high'\n  } else if (p > 0) {\n    return 'mid'\n  } else {\n    return 'low'\n  }\n"
        "}\n"
        "return {q: f(1)}"
    )
    assert codes(src) == []


def test_condition_type_check_on_literals():
    assert "ConditionNotBoolean" in codes("condition(0.5)\nreturn {q: true}")


def test_boolean_operator_type_check():
    assert "TypeMismatch" in codes("return {q: flip(0.5) && 3}")


def test_duplicate_definition_flagged():
    src = "var x = 1\nvar x = 2\nreturn {q: x}"
    assert "DuplicateDefinition" in codes(src)


def test_clean_corpus_validates(clean_programs):
    for path in clean_programs:
        assert validate(parse(path.read_text())) == [], path.name
