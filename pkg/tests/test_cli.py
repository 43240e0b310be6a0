import json

import pytest

from medmsa.cli import main


@pytest.fixture(scope="module")
def config_path(repo):
    return str(repo / "fixture_config.json")


def test_usage_error_exits_1(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["run", "--k", "3"])  # missing required --vignette/--out
    assert excinfo.value.code == 1


def test_unknown_subcommand_exits_1():
    with pytest.raises(SystemExit) as excinfo:
        main(["frobnicate"])
    assert excinfo.value.code == 1


def test_enumerate_two_coin_prints_posterior(repo, capsys):
    code = main(["enumerate", "--program", str(repo / "data/programs/clean/two_coin.medppl")])
    out = capsys.readouterr().out
    assert code == 0
    assert "P(q=true)=0.666666" in out


def test_enumerate_rejects_gaussian_program(repo, capsys):
    code = main(["enumerate", "--program", str(repo / "data/programs/marie.medppl")])
    assert code == 2


def test_sample_command(repo, capsys):
    code = main(
        [
            "sample",
            "--program",
            str(repo / "data/programs/clean/two_coin.medppl"),
            "--samples",
            "2000",
            "--seed",
            "7",
            "--json",
        ]
    )
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["accepted_count"] == 2000
    frequency = payload["queries"]["q"].count(True) / 2000
    assert 0.6 < frequency < 0.73


def test_missing_program_file_exits_2(tmp_path, capsys):
    assert main(["enumerate", "--program", str(tmp_path / "nope.medppl")]) == 2


def test_run_differential_edit_flow(repo, config_path, tmp_path, capsys):
    out_root = tmp_path / "runs"
    code = main(
        [
            "run",
            "--vignette",
            str(repo / "data/vignettes/vignette2.json"),
            "--k",
            "3",
            "--seed",
            "7",
            "--config",
            config_path,
            "--out",
            str(out_root),
        ]
    )
    assert code == 0
    run_dir = capsys.readouterr().out.strip()

    code = main(["differential", "--run", run_dir, "--query", "2", "--top", "10"])
    out = capsys.readouterr().out
    assert code == 0
    assert "heart attack" in out
    assert "[catch-all]" in out

    code = main(["differential", "--run", run_dir, "--query", "2", "--top", "2", "--json"])
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    assert len(payload["entries"]) == 2
    assert payload["coverage"] < 1.0

    edit_file = tmp_path / "edit.json"
    edit_file.write_text(
        json.dumps(
            {
                "kind": "ReplaceCondition",
                "target": 3,
                "payload": "does_exercise('sean')",
                "note": "what-if",
            }
        )
    )
    code = main(
        ["edit", "--run", run_dir, "--model", "1", "--edit", str(edit_file), "--seed", "5", "--json"]
    )
    payload = json.loads(capsys.readouterr().out)
    assert code == 0
    before = {e["category"]: e["probability"] for e in payload["before"]["query2"]["entries"]}
    after = {e["category"]: e["probability"] for e in payload["after"]["query2"]["entries"]}
    assert after["heart attack"] < before["heart attack"]


def test_no_valid_models_exits_3(repo, config_path, tmp_path, capsys):
    code = main(
        [
            "run",
            "--vignette",
            str(repo / "data/vignettes/vignette1.json"),
            "--k",
            "1",
            "--seed",
            "7",
            "--config",
            config_path,
            "--out",
            str(tmp_path / "runs"),
            "--json",
        ]
    )
    captured = capsys.readouterr()
    assert code == 3
    diag = json.loads(captured.err.strip().splitlines()[-1])
    assert diag["code"] == "NO_VALID_MODELS"
    # the failed run is still persisted for audit
    run_dir = captured.out.strip()
    assert (tmp_path / "runs").exists() and run_dir

    code = main(["differential", "--run", run_dir, "--query", "1"])
    capsys.readouterr()
    assert code == 3
