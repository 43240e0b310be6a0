import json

import pytest

from medmsa import store
from medmsa.config import PipelineConfig


def test_round_trip_equality(run_v2):
    run, run_dir = run_v2
    loaded = store.load_run(run_dir)
    assert loaded == run


def test_expected_layout(run_v2):
    run, run_dir = run_v2
    assert (run_dir / "manifest.json").is_file()
    assert (run_dir / "vignette.json").is_file()
    assert (run_dir / "mapping.json").is_file()
    assert (run_dir / "differential" / "query1.json").is_file()
    assert (run_dir / "differential" / "query2.json").is_file()
    for candidate in run.candidates:
        cdir = run_dir / "candidates" / str(candidate.index)
        assert (cdir / "model.medppl").is_file()
        assert (cdir / "model.patched.medppl").is_file()
        assert (cdir / "checks.json").is_file()
        if candidate.sample_set is not None:
            assert (cdir / "samples.json").is_file()


def test_duplicate_run_id_refused(run_v2):
    run, run_dir = run_v2
    with pytest.raises(store.DuplicateRunId):
        store.persist_run(run, run_dir.parent)


def test_missing_manifest_reports_incomplete(tmp_path):
    broken = tmp_path / "half-run"
    (broken / "candidates" / "1").mkdir(parents=True)
    (broken / "vignette.json").write_text("{}")
    with pytest.raises(store.IncompleteRun):
        store.load_run(broken)


def test_list_runs_empty_root(tmp_path):
    listing = store.list_runs(tmp_path / "nowhere")
    assert listing.runs == ()
    assert listing.incomplete == 0


def test_list_runs_mixed_and_tolerates_foreign_files(run_v2, tmp_path):
    run, run_dir = run_v2
    root = tmp_path / "root"
    root.mkdir()
    complete = store.persist_run(run, root)
    assert complete.name == run.run_id
    incomplete = root / "interrupted"
    (incomplete / "candidates").mkdir(parents=True)
    (root / "notes.txt").write_text("not a run")
    listing = store.list_runs(root)
    assert [m.run_id for m in listing.runs] == [run.run_id]
    assert listing.incomplete == 1


def test_schema_version_gates_readers(run_v2, tmp_path):
    run, run_dir = run_v2
    root = tmp_path / "root"
    root.mkdir()
    new_dir = store.persist_run(run, root)
    manifest_path = new_dir / "manifest.json"
    payload = json.loads(manifest_path.read_text())
    payload["schema_version"] = 999
    manifest_path.write_text(json.dumps(payload))
    with pytest.raises(store.SchemaVersionMismatch):
        store.load_manifest(new_dir)


def test_tree_hash_detects_any_byte_change(tmp_path):
    a = tmp_path / "a"
    (a / "sub").mkdir(parents=True)
    (a / "sub" / "x.txt").write_text("same")
    (a / "y.txt").write_text("other")
    baseline = store.tree_hash(a)
    assert baseline == store.tree_hash(a)
    (a / "y.txt").write_text("other!")
    assert store.tree_hash(a) != baseline


def test_run_id_is_deterministic_only_in_deterministic_mode():
    config = PipelineConfig()
    a = store.make_run_id("v", 3, 7, config, deterministic=True)
    b = store.make_run_id("v", 3, 7, config, deterministic=True)
    assert a == b
    assert store.make_run_id("v", 3, 8, config, deterministic=True) != a
    c = store.make_run_id("v", 3, 7, config, deterministic=False)
    d = store.make_run_id("v", 3, 7, config, deterministic=False)
    assert c != d


def test_deterministic_artifacts_have_zeroed_times(run_v2):
    run, run_dir = run_v2
    manifest = store.load_manifest(run_dir)
    assert manifest.started_at == 0.0 and manifest.finished_at == 0.0
    for candidate in run.valid_models():
        payload = json.loads(
            (run_dir / "candidates" / str(candidate.index) / "samples.json").read_text()
        )
        assert payload["wall_time"] == 0.0
