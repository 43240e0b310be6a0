import json

import pytest

from medmsa import canonicalize as canon
from medmsa.lm import LmBackend, LmResponse, ReplayBackend
from medmsa.ppl import SampleSet


class StubLm(LmBackend):
    backend_id = "stub"

    def __init__(self, text):
        self.text = text

    def complete_many(self, request, n):
        return [LmResponse(text=self.text, backend_id="stub") for _ in range(n)]


def identity_stub(categories):
    return StubLm(json.dumps({c: c for c in categories}))


def test_acceptance_set_with_shipped_fixture(repo, fixture_config):
    lm = ReplayBackend(fixture_config.fixture_dir)
    overrides = canon.load_overrides(repo / "data/overrides.json")
    raws = {"collapsed lung", "pneumothorax", "heart_attack", "anxiety disorder", "anxiety attack"}
    mapping = canon.build_mapping(raws, lm, overrides)
    targets = {mapping.canonical(r) for r in raws}
    assert targets == {"pneumothorax", "heart attack", "anxiety"}
    assert mapping.canonical("collapsed lung") == "pneumothorax"
    assert mapping.canonical("heart_attack") == "heart attack"
    assert mapping.provenance["anxiety disorder"] == "Override"
    # idempotent: canonical names map to themselves
    for name in targets:
        assert mapping.canonical(name) == name


def test_synonyms_merge_but_distinct_conditions_stay_apart():
    lm = StubLm(json.dumps({
        "collapsed lung": "pneumothorax",
        "pneumothorax": "pneumothorax",
        "respiratory illness": "respiratory illness",
        "pneumonia": "pneumonia",
    }))
    mapping = canon.build_mapping(
        {"collapsed lung", "pneumothorax", "respiratory illness", "pneumonia"}, lm
    )
    assert mapping.canonical("collapsed lung") == "pneumothorax"
    assert mapping.canonical("respiratory illness") == "respiratory illness"
    assert mapping.canonical("pneumonia") == "pneumonia"


def test_normalization_lowercases_and_strips_underscores():
    lm = identity_stub(["heart attack", "panic attack"])
    mapping = canon.build_mapping({"Heart_Attack", "PANIC_ATTACK"}, lm)
    assert mapping.canonical("Heart_Attack") == "heart attack"
    assert mapping.canonical("PANIC_ATTACK") == "panic attack"
    assert all("_" not in c for c in mapping.canonical_names())


def test_lm_inventing_categories_is_rejected():
    lm = StubLm(json.dumps({"muscle strain": "fibromyalgia"}))
    mapping = canon.build_mapping({"muscle strain"}, lm)
    assert mapping.canonical("muscle strain") == "muscle strain"
    assert mapping.provenance["muscle strain"] == "Identity"
    assert any("invented" in w for w in mapping.warnings)


def test_protected_heart_attack_not_remapped_by_lm():
    lm = StubLm(json.dumps({"heart attack": "cardiac event", "cardiac event": "cardiac event"}))
    mapping = canon.build_mapping({"heart attack", "cardiac event"}, lm)
    assert mapping.canonical("heart attack") == "heart attack"


def test_override_can_remap_heart_attack():
    lm = identity_stub(["heart attack"])
    mapping = canon.build_mapping({"heart attack"}, lm, {"heart attack": "myocardial infarction"})
    assert mapping.canonical("heart attack") == "myocardial infarction"
    assert mapping.provenance["heart attack"] == "Override"


def test_unparsable_output_falls_back_to_identity_with_warning():
    mapping = canon.build_mapping({"a_b", "c"}, StubLm("I cannot help with that."))
    assert mapping.canonical("a_b") == "a b"
    assert mapping.canonical("c") == "c"
    assert any("unparsable" in w for w in mapping.warnings)
    assert set(mapping.provenance.values()) == {"Identity"}


def test_empty_raw_set_rejected():
    with pytest.raises(ValueError):
        canon.build_mapping(set(), identity_stub([]))


def _sample_set(values, query="query2"):
    return SampleSet(
        model_id="m",
        queries={query: values, "query1": [True] * len(values)},
        accepted_count=len(values),
        proposed_count=len(values),
        seed=0,
    )


def test_apply_mapping_preserves_counts_and_merges():
    lm = StubLm(json.dumps({"collapsed lung": "pneumothorax", "pneumothorax": "pneumothorax"}))
    mapping = canon.build_mapping({"collapsed_lung", "pneumothorax"}, lm)
    values = ["pneumothorax"] * 2000 + ["collapsed_lung"] * 500
    out = canon.apply_mapping(_sample_set(values), mapping, "query2")
    assert out.accepted_count == 2500
    assert out.queries["query2"].count("pneumothorax") == 2500
    assert len(out.queries["query2"]) == len(values)


def test_apply_mapping_normalizes_surface_forms():
    lm = identity_stub(["heart attack"])
    mapping = canon.build_mapping({"heart_attack"}, lm)
    out = canon.apply_mapping(_sample_set(["heart_attack"] * 5000), mapping, "query2")
    assert out.queries["query2"] == ["heart attack"] * 5000


def test_apply_mapping_stringifies_booleans_and_keeps_other_queries():
    lm = identity_stub(["x"])
    mapping = canon.build_mapping({"x"}, lm)
    sample_set = _sample_set(["x", "x"])
    out = canon.apply_mapping(sample_set, mapping, "query1")
    assert out.queries["query1"] == ["true", "true"]
    assert out.queries["query2"] == ["x", "x"]  # untouched raw values


def test_unmapped_category_is_a_pipeline_bug():
    lm = identity_stub(["known"])
    mapping = canon.build_mapping({"known"}, lm)
    with pytest.raises(canon.UnmappedCategory):
        canon.apply_mapping(_sample_set(["unknown"]), mapping, "query2")


def test_extend_mapping_keeps_existing_entries():
    lm = identity_stub(["a"])
    mapping = canon.build_mapping({"a"}, lm, {"a": "alpha"})
    extended = canon.extend_mapping(mapping, {"b_c"}, identity_stub([]), {})
    assert extended.canonical("a") == "alpha"
    assert extended.canonical("b_c") == "b c"
    # no new categories: unchanged mapping comes back as-is
    assert canon.extend_mapping(mapping, {"a"}, identity_stub([]), {}) is mapping


def test_catch_all_flagging():
    lm = identity_stub(["other", "flu"])
    mapping = canon.build_mapping({"other", "flu"}, lm)
    assert mapping.is_catch_all("other")
    assert not mapping.is_catch_all("flu")


def test_mapping_json_round_trip():
    lm = identity_stub(["a"])
    mapping = canon.build_mapping({"a"}, lm)
    assert canon.CategoryMapping.from_json(mapping.to_json()) == mapping
