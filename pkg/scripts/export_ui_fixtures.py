"""Record real service responses as JSON fixtures for the frontend tests.

Builds the vignette-4 and vignette-2 replay runs, serves them in-process,
captures the exact payloads the UI consumes (run list, differentials, model
listings/detail, the Figure-4-style exercise-flip edit) and writes them under
frontend/tests/fixtures/. Run from the repo root after build_fixtures.py.
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from fastapi.testclient import TestClient  # noqa: E402

from medmsa import synthesis  # noqa: E402
from medmsa.config import PipelineConfig  # noqa: E402
from medmsa.lm import ReplayBackend  # noqa: E402
from medmsa.service import create_app  # noqa: E402
from medmsa.synthesis import Vignette  # noqa: E402

OUT = REPO / "frontend" / "tests" / "fixtures"


def build(vignette_name: str, root: Path):
    config = PipelineConfig.load(REPO / "fixture_config.json").with_overrides(
        fixture_dir=str(REPO / "fixtures/lm"), overrides_path=str(REPO / "data/overrides.json")
    )
    vignette = Vignette.load(REPO / "data/vignettes" / f"{vignette_name}.json")
    lm = ReplayBackend(config.fixture_dir)
    run, _ = synthesis.run_pipeline(vignette, 20, 7, config, lm, root)
    return run, config


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as tmp:
        root = Path(tmp) / "runs"
        run4, config = build("vignette4", root)
        run2, _ = build("vignette2", root)
        client = TestClient(create_app(root, config))

        def save(name: str, payload) -> None:
            (OUT / f"{name}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

        save("runs", client.get("/runs").json())
        save("run_v4_status", client.get(f"/runs/{run4.run_id}").json())
        save("run_v2_status", client.get(f"/runs/{run2.run_id}").json())
        save("v4_differential_q2", client.get(f"/runs/{run4.run_id}/differential", params={"query": 2, "top": 10}).json())
        save("v4_models", client.get(f"/runs/{run4.run_id}/models").json())
        save("v2_models", client.get(f"/runs/{run2.run_id}/models").json())

        target = next(
            c.index for c in run2.valid_models() if "!does_exercise('sean')" in c.patched_source
        )
        save("v2_model_detail", client.get(f"/runs/{run2.run_id}/models/{target}").json())
        save(
            "v2_differential_q2",
            client.get(f"/runs/{run2.run_id}/differential", params={"query": 2, "top": 10}).json(),
        )
        edit = {
            "kind": "ReplaceCondition",
            "target": 3,
            "payload": "does_exercise('sean')",
            "note": "what if Sean had exercised?",
            "seed": 424242,
        }
        response = client.post(f"/runs/{run2.run_id}/models/{target}/edits", json=edit)
        assert response.status_code == 200, response.text
        save("v2_edit_result", response.json())
        save("v2_interventions", client.get(f"/runs/{run2.run_id}/interventions").json())
        save(
            "meta",
            {
                "v4_run_id": run4.run_id,
                "v2_run_id": run2.run_id,
                "v2_edit_model": target,
            },
        )
    print(f"UI fixtures written to {OUT}")


if __name__ == "__main__":
    main()
