"""Acceptance criteria, one test per criterion, tolerances pinned here.

A terminal-summary hook in conftest prints one PASS/FAIL line per criterion
at the end of the session.
"""

import dataclasses
import time

import pytest
from fastapi.testclient import TestClient

from medmsa import canonicalize as canon
from medmsa import intervene as iv
from medmsa import store, synthesis
from medmsa.config import PipelineConfig
from medmsa.differential import ensemble_sample_sets
from medmsa.lm import LmBackend, LmResponse, ReplayBackend
from medmsa.ppl import Budget, Edit, enumerate_program, parse, rejection_sample, validate
from medmsa.service import ERROR_CODES, create_app
from medmsa.synthesis import CandidateStatus, check_candidate

from conftest import build_run, load_vignette
from oracles import marie_hybrid, total_variation

CALIBRATION_PROGRAMS = [
    "two_coin",
    "categorical_weights",
    "mem_equality",
    "marie_discrete",
    "noisy_chain",
    "ternary_includes",
    "arithmetic_compare",
    "unconditioned_record",
    "sean_vignette1",
    "sean_vignette2",
    "sean_vignette3",
    "sean_v4_calibration",
]


def test_acceptance_sampler_calibration(repo):
    """TV(50k-sample frequencies, exact enumeration) <= 0.02 per query over a
    corpus of >= 10 discrete programs, in under 60 seconds."""
    assert len(CALIBRATION_PROGRAMS) >= 10
    started = time.monotonic()
    for name in CALIBRATION_PROGRAMS:
        program = parse((repo / "data/programs/clean" / f"{name}.medppl").read_text())
        assert validate(program) == []
        exact = enumerate_program(program)
        sample_set = rejection_sample(
            program, 50_000, Budget(max_proposals=30_000_000), seed=20_000 + hash(name) % 1000,
            model_id=name,
        )
        assert sample_set.accepted_count == 50_000, name
        for query, exact_dist in exact.queries.items():
            tv = total_variation(sample_set.frequencies(query), exact_dist)
            assert tv <= 0.02, (name, query, tv)
    elapsed = time.monotonic() - started
    assert elapsed < 60.0, f"calibration took {elapsed:.1f}s"


def test_acceptance_exemplar_conformance(marie_source):
    """The shipped exemplar program parses, validates and samples unmodified;
    P(query1=true) within +-0.02 of the hybrid enumeration/normal-tail oracle."""
    program = parse(marie_source)
    assert validate(program) == []
    sample_set = rejection_sample(program, 5000, Budget(), seed=11, model_id="marie")
    assert sample_set.accepted_count == 5000
    oracle = marie_hybrid()
    p_true = sample_set.frequencies("query1").get("true", 0.0)
    assert abs(p_true - oracle["query1_true"]) <= 0.02
    p_parasite = sample_set.frequencies("query2").get("parasite", 0.0)
    assert abs(p_parasite - oracle["query2"]["parasite"]) <= 0.03


class _ConstScore(LmBackend):
    backend_id = "const"

    def complete_many(self, request, n):
        return [LmResponse(text="SCORE: 0.9", backend_id="const") for _ in range(n)]


@pytest.mark.slow
def test_acceptance_90_second_budget(repo):
    """A near-zero-acceptance model is BudgetFailed within 95 s wall clock
    under the default 90 s initialization budget; a satisfiable model passes
    in under 5 s."""
    vignette = load_vignette("vignette2")
    config = PipelineConfig(init_budget_seconds=90.0, init_budget_max_proposals=None)
    budget = Budget(max_seconds=config.init_budget_seconds, max_proposals=None)

    good = (repo / "data/programs/clean/sean_vignette2.medppl").read_text()
    started = time.monotonic()
    status, _, _, _ = check_candidate(
        good, _ConstScore(), budget, vignette=vignette, config=config, seed=1
    )
    assert status is CandidateStatus.COMPILED
    assert time.monotonic() - started < 5.0

    hopeless = "condition(flip(0.0000000000001))\nreturn {query1: true, query2: 'none'}\n"
    started = time.monotonic()
    status, _, diagnostics, _ = check_candidate(
        hopeless, _ConstScore(), budget, vignette=vignette, config=config, seed=2
    )
    elapsed = time.monotonic() - started
    assert status is CandidateStatus.BUDGET_FAILED
    assert any(d.code == "BudgetExhausted" for d in diagnostics)
    assert elapsed < 95.0, f"budget enforcement took {elapsed:.1f}s"


def test_acceptance_patch_idempotence(commented_programs, clean_programs, marie_source):
    """The condition-uncomment patch fixes 5 commented sources and is a no-op
    on 20 clean sources; applying it twice equals applying it once."""
    assert len(commented_programs) == 5
    for path in commented_programs:
        source = path.read_text()
        patched = synthesis.patch_conditions(source)
        assert patched != source
        assert parse(patched).conditions
        assert synthesis.patch_conditions(patched) == patched
    clean_sources = [p.read_text() for p in clean_programs] + [marie_source]
    assert len(clean_sources) >= 20
    for source in clean_sources:
        assert synthesis.patch_conditions(source) == source


@pytest.mark.slow
def test_acceptance_fixture_pipeline_determinism(fixture_config, tmp_path_factory):
    """Replay runs (k=20, seed 7) on each Sean vignette are byte-identical
    across two executions (directory hash equality). Both executions run
    fresh here: run directories from session fixtures may accumulate
    interventions from other tests."""
    for name in ("vignette1", "vignette2", "vignette3", "vignette4"):
        first_run, first_dir = build_run(
            name, 20, 7, fixture_config, tmp_path_factory.mktemp(f"det-a-{name}")
        )
        second_run, second_dir = build_run(
            name, 20, 7, fixture_config, tmp_path_factory.mktemp(f"det-b-{name}")
        )
        assert second_run.run_id == first_run.run_id
        assert store.tree_hash(second_dir) == store.tree_hash(first_dir), name


def test_acceptance_figure2_qualitative(run_v1, run_v2, run_v3, run_v4):
    """Vignette-2 ensemble P(heart attack) exceeds vignette-3's; pneumothorax
    appears in the vignette-4 differential and in none of vignettes 1-3."""
    p2 = run_v2[0].differentials["query2"].probability("heart attack")
    p3 = run_v3[0].differentials["query2"].probability("heart attack")
    assert p2 > p3
    assert "pneumothorax" in run_v4[0].differentials["query2"].categories()
    for run, _ in (run_v1, run_v2, run_v3):
        assert "pneumothorax" not in run.differentials["query2"].categories()


def test_acceptance_canonicalization(repo, fixture_config):
    """The acceptance raw set with the shipped override file yields exactly
    {pneumothorax, heart attack, anxiety}; sample counts are conserved."""
    lm = ReplayBackend(fixture_config.fixture_dir)
    overrides = canon.load_overrides(repo / "data/overrides.json")
    raws = {"collapsed lung", "pneumothorax", "heart_attack", "anxiety disorder", "anxiety attack"}
    mapping = canon.build_mapping(raws, lm, overrides)
    assert {mapping.canonical(r) for r in raws} == {"pneumothorax", "heart attack", "anxiety"}

    from medmsa.ppl import SampleSet

    values = (
        ["collapsed lung"] * 500
        + ["pneumothorax"] * 2000
        + ["heart_attack"] * 1000
        + ["anxiety disorder"] * 700
        + ["anxiety attack"] * 800
    )
    sample_set = SampleSet(
        model_id="m",
        queries={"query2": values},
        accepted_count=len(values),
        proposed_count=len(values),
        seed=0,
    )
    mapped = canon.apply_mapping(sample_set, mapping, "query2")
    counts = mapped.counts("query2")
    assert sum(counts.values()) == len(values)
    assert counts == {"pneumothorax": 2500, "heart attack": 1000, "anxiety": 1500}


def test_acceptance_ensembling_law():
    """Equal-weight averaging reproduces the hand-computed two-model example
    exactly and is invariant over 5 random model orderings."""
    import random

    from medmsa.ppl import SampleSet

    def sample_set(model_id, counts):
        values = [c for category, n in counts.items() for c in [category] * n]
        return SampleSet(
            model_id=model_id,
            queries={"query2": values},
            accepted_count=len(values),
            proposed_count=len(values),
            seed=0,
        )

    mapping = canon.CategoryMapping(
        entries={c: c for c in ("heart attack", "panic attack", "other")},
        provenance={},
    )
    a = sample_set("a", {"heart attack": 2500, "other": 2500})
    b = sample_set("b", {"panic attack": 5000})
    dist = ensemble_sample_sets([a, b], "query2", mapping)
    assert dist.probability("panic attack") == 0.5
    assert dist.probability("heart attack") == 0.25
    assert dist.probability("other") == 0.25

    sets = [a, b, sample_set("c", {"heart attack": 10, "panic attack": 30})]
    baseline = ensemble_sample_sets(sets, "query2", mapping).entries
    shuffler = random.Random(1)
    for _ in range(5):
        shuffled = sets[:]
        shuffler.shuffle(shuffled)
        assert ensemble_sample_sets(shuffled, "query2", mapping).entries == baseline


def test_acceptance_intervention_direction(run_v2, fixture_config):
    """Flipping the exercise condition on the shipped discrete vignette-2
    fixture model moves P(heart attack) in the direction exact enumeration
    gives, and the sampled after-distribution is within TV 0.02 of its
    enumeration."""
    run, run_dir = run_v2
    candidate = next(
        c for c in run.valid_models() if "!does_exercise('sean')" in c.patched_source
    )
    program = parse(candidate.patched_source)
    exact_before = enumerate_program(program).queries["query2"]
    edited_source = candidate.patched_source.replace(
        "!does_exercise('sean')", "does_exercise('sean')"
    )
    exact_after = enumerate_program(parse(edited_source)).queries["query2"]
    assert exact_after["heart_attack"] < exact_before["heart_attack"]

    heavy = dataclasses.replace(
        run, config=run.config.with_overrides(samples_per_model=50_000)
    )
    edit = Edit(kind="ReplaceCondition", target=3, payload="does_exercise('sean')")
    result = iv.intervene(
        heavy, run_dir, candidate.index, edit, seed=555, lm=ReplayBackend(fixture_config.fixture_dir)
    )
    before_p = result.before["query2"].probability("heart attack")
    after_p = result.after["query2"].probability("heart attack")
    assert after_p < before_p

    sampled_after = {
        e.category.replace(" ", "_"): e.probability for e in result.after["query2"].entries
    }
    assert total_variation(sampled_after, exact_after) <= 0.02


def test_acceptance_service_contract(run_v2, run_v1_k1, fixture_config, tmp_path):
    """Every endpoint answers against a fixture run; error codes come from
    the published enum; no web UI build is involved."""
    root = tmp_path / "root"
    root.mkdir()
    run2, _ = run_v2
    run1, _ = run_v1_k1
    store.persist_run(run2, root)
    store.persist_run(run1, root)
    client = TestClient(create_app(root, fixture_config, ui_dir=None))

    assert client.get("/health").json()["status"] == "ok"
    runs = client.get("/runs").json()
    assert {run2.run_id, run1.run_id} <= {r["run_id"] for r in runs["runs"]}
    assert client.get(f"/runs/{run2.run_id}").json()["complete"]
    models = client.get(f"/runs/{run2.run_id}/models").json()["models"]
    assert len(models) == run2.k
    compiled_index = next(m["index"] for m in models if m["status"] == "Compiled")
    assert client.get(f"/runs/{run2.run_id}/models/{compiled_index}").status_code == 200
    source = client.get(f"/runs/{run2.run_id}/models/{compiled_index}/source")
    assert source.headers["content-type"].startswith("text/plain")
    diff = client.get(f"/runs/{run2.run_id}/differential", params={"query": 2, "top": 10})
    assert diff.status_code == 200 and len(diff.json()["entries"]) <= 10

    edit_payload = {
        "kind": "ReplaceCondition",
        "target": 3,
        "payload": "does_exercise('sean')",
        "seed": 99,
    }
    target = next(
        c.index for c in run2.valid_models() if "!does_exercise('sean')" in c.patched_source
    )
    edit_response = client.post(f"/runs/{run2.run_id}/models/{target}/edits", json=edit_payload)
    assert edit_response.status_code == 200
    body = edit_response.json()
    assert (
        body["after"]["query2"]["entries"][0]["category"]
        != "heart attack"
        or body["after"]["query2"]["entries"][0]["probability"]
        < body["before"]["query2"]["entries"][0]["probability"]
    )
    interventions = client.get(f"/runs/{run2.run_id}/interventions")
    assert interventions.status_code == 200

    # error codes come from the published enum
    for response, expected in [
        (client.get("/runs/absent/differential"), "RUN_NOT_FOUND"),
        (client.get(f"/runs/{run2.run_id}/models/999/source"), "MODEL_NOT_FOUND"),
        (client.get(f"/runs/{run1.run_id}/differential"), "NO_VALID_MODELS"),
        (
            client.post(
                f"/runs/{run2.run_id}/models/{target}/edits", json={"kind": "Nonsense"}
            ),
            "EDIT_INVALID",
        ),
    ]:
        code = response.json()["error"]["code"]
        assert code == expected
        assert code in ERROR_CODES
