import dataclasses

import pytest

from medmsa import intervene as iv
from medmsa import store
from medmsa.lm import ReplayBackend
from medmsa.ppl import Budget, Edit, enumerate_program, parse, rejection_sample
from medmsa.synthesis import CandidateStatus

from oracles import total_variation

EXERCISE_FLIP = Edit(
    kind="ReplaceCondition",
    target=3,
    payload="does_exercise('sean')",
    note="what if Sean had exercised?",
)


def _lm(config):
    return ReplayBackend(config.fixture_dir)


def _find_exercise_candidate(run):
    for candidate in run.valid_models():
        program = parse(candidate.patched_source)
        if len(program.conditions) == 4:
            return candidate
    raise AssertionError("no candidate with the exercise condition")


def test_exercise_flip_direction_matches_enumeration(run_v2, fixture_config):
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    program = parse(candidate.patched_source)
    exact_before = enumerate_program(program).queries["query2"]
    exact_after = enumerate_program(
        parse(candidate.patched_source.replace("!does_exercise('sean')", "does_exercise('sean')"))
    ).queries["query2"]
    assert exact_after["heart_attack"] < exact_before["heart_attack"]

    result = iv.intervene(run, run_dir, candidate.index, EXERCISE_FLIP, seed=123, lm=_lm(fixture_config))
    before_p = result.before["query2"].probability("heart attack")
    after_p = result.after["query2"].probability("heart attack")
    assert after_p < before_p
    assert result.base_model_id == f"candidate:{candidate.index}"
    assert not result.budget_exhausted
    # sampled after-distribution tracks the exact posterior of the edited model
    sampled_after = {e.category.replace(" ", "_"): e.probability for e in result.after["query2"].entries}
    exact_named = {k: v for k, v in exact_after.items()}
    assert total_variation(sampled_after, exact_named) <= 0.02 + 0.01  # 5000 samples


def test_before_equals_stored_distribution_no_recomputation(run_v2, fixture_config):
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    result = iv.intervene(run, run_dir, candidate.index, EXERCISE_FLIP, seed=5, lm=_lm(fixture_config))
    from medmsa.differential import ensemble_sample_sets

    stored = ensemble_sample_sets([candidate.sample_set], "query2", run.mapping)
    assert result.before["query2"].entries == stored.entries
    assert result.before_ensemble["query2"].entries == run.differentials["query2"].entries


def test_base_model_files_untouched(run_v2, fixture_config):
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    cdir = run_dir / "candidates" / str(candidate.index)
    before_bytes = {p.name: p.read_bytes() for p in cdir.iterdir()}
    iv.intervene(run, run_dir, candidate.index, EXERCISE_FLIP, seed=77, lm=_lm(fixture_config))
    after_bytes = {p.name: p.read_bytes() for p in cdir.iterdir()}
    assert after_bytes == before_bytes


def test_identity_edit_round_trips_within_tv(run_v2, fixture_config):
    # remove a condition and re-add the identical text: the edited model's
    # sampled posterior matches the base model's exact posterior within the
    # calibration bound at 50,000 samples
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    program = parse(candidate.patched_source)
    condition_text = "!does_exercise('sean')"
    from medmsa.ppl import apply_edit

    intermediate = apply_edit(program, Edit(kind="RemoveCondition", target=3))
    restored = apply_edit(intermediate, Edit(kind="AddCondition", payload=condition_text))
    exact = enumerate_program(program).queries["query2"]
    sampled = rejection_sample(restored, 50_000, Budget(max_proposals=20_000_000), seed=31)
    assert total_variation(sampled.frequencies("query2"), exact) <= 0.02


def test_unsatisfiable_edit_flags_budget_and_leaves_run_unharmed(run_v2, fixture_config):
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    tight = dataclasses.replace(run, config=run.config.with_overrides(sampling_max_proposals=50_000))
    edit = Edit(kind="AddCondition", payload="flip(0.00000001)", note="impossible")
    result = iv.intervene(tight, run_dir, candidate.index, edit, seed=13, lm=_lm(fixture_config))
    assert result.budget_exhausted
    assert result.after["query2"].entries == ()
    # run directory outside interventions/ is untouched and loadable
    assert store.load_run(run_dir).run_id == run.run_id


def test_edit_non_compiled_model_rejected(run_v2, fixture_config):
    run, run_dir = run_v2
    broken = next(c for c in run.candidates if c.status is not CandidateStatus.COMPILED)
    with pytest.raises(iv.ModelNotCompiled):
        iv.intervene(run, run_dir, broken.index, EXERCISE_FLIP, seed=1, lm=_lm(fixture_config))
    with pytest.raises(iv.ModelNotFound):
        iv.intervene(run, run_dir, 999, EXERCISE_FLIP, seed=1, lm=_lm(fixture_config))


def test_version_lineage_replays_to_identical_source(run_v2, fixture_config):
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    first = iv.intervene(run, run_dir, candidate.index, EXERCISE_FLIP, seed=3, lm=_lm(fixture_config))
    second_edit = Edit(kind="RemoveCondition", target=2, note="drop the age observation")
    second = iv.intervene(run, run_dir, first.new_version_id, second_edit, seed=4, lm=_lm(fixture_config))

    listed = iv.list_interventions(run_dir)
    ids = [meta["version"] for meta in listed]
    assert first.new_version_id in ids and second.new_version_id in ids
    parents = {meta["version"]: meta["parent"] for meta in listed}
    assert parents[second.new_version_id] == f"intervention:{first.new_version_id}"

    stored_leaf = (run_dir / "interventions" / second.new_version_id / "model.medppl").read_text()
    assert iv.replay_chain(run, run_dir, second.new_version_id) == stored_leaf


def test_intervention_is_reproducible_from_recorded_seed(run_v2, fixture_config, tmp_path):
    run, run_dir = run_v2
    candidate = _find_exercise_candidate(run)
    result = iv.intervene(run, run_dir, candidate.index, EXERCISE_FLIP, seed=2718, lm=_lm(fixture_config))
    vdir = run_dir / "interventions" / result.new_version_id
    meta = store.load_json(vdir / "meta.json")
    assert meta["seed"] == 2718
    # replaying the sampling with the recorded seed reproduces the samples
    from medmsa import rng
    from medmsa.ppl import SampleSet

    program = parse((vdir / "model.medppl").read_text())
    replayed = rejection_sample(
        program,
        run.config.samples_per_model,
        Budget(max_proposals=run.config.sampling_max_proposals),
        seed=rng.derive_seed(2718, "intervention", result.new_version_id),
        model_id=result.new_version_id,
    )
    stored = SampleSet.from_json(store.load_json(vdir / "samples.json"))
    assert replayed == stored
