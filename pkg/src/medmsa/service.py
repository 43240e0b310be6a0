"""JSON-over-HTTP service exposing runs, models, differentials and edits.

Every number served here is read back from the persisted run directory; the
service keeps state only for synthesis jobs still in flight. Long-running
synthesis is asynchronous: POST /runs returns 202 with a run id whose
progress is pollable until the manifest lands on disk.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from . import differential, intervene, rng, store, synthesis
from .config import PipelineConfig
from .lm import FixtureMissing, make_backend
from .ppl import (
    Edit,
    EditProducesInvalidProgram,
    EditTargetMissing,
    MedPplError,
    parse,
)

SCHEMA_VERSION = store.SCHEMA_VERSION

ERROR_CODES = (
    "BAD_REQUEST",
    "RUN_NOT_FOUND",
    "RUN_EXISTS",
    "RUN_ACTIVE",
    "MODEL_NOT_FOUND",
    "MODEL_NOT_COMPILED",
    "EDIT_TARGET_MISSING",
    "EDIT_INVALID",
    "NO_VALID_MODELS",
    "QUERY_NOT_FOUND",
    "FIXTURE_MISSING",
    "INTERNAL",
)


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str, details=None):
        assert code in ERROR_CODES
        self.status = status
        self.code = code
        self.message = message
        self.details = details
        super().__init__(message)

    def body(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "error": {"code": self.code, "message": self.message, "details": self.details},
        }


class _Progress:
    """Mutable per-run stage board; candidate stages only move forward."""

    _ORDER = ["pending", "translate", "sketch", "code", "check", "sample", "done"]

    def __init__(self, k: int):
        self.lock = threading.Lock()
        self.k = k
        self.stages = {i: "pending" for i in range(1, k + 1)}
        self.statuses: dict[int, str] = {}
        self.state = "running"
        self.error: dict | None = None

    def update(self, index: int, stage: str, status: str) -> None:
        with self.lock:
            if self._ORDER.index(stage) >= self._ORDER.index(self.stages[index]):
                self.stages[index] = stage
            if stage == "done":
                self.statuses[index] = status

    def snapshot(self) -> dict:
        with self.lock:
            return {
                "state": self.state,
                "error": self.error,
                "candidates": [
                    {
                        "index": i,
                        "stage": self.stages[i],
                        "status": self.statuses.get(i),
                    }
                    for i in range(1, self.k + 1)
                ],
            }


def create_app(root: str | Path, config: PipelineConfig, ui_dir: str | Path | None = None) -> FastAPI:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="medmsa", version="0.1.0")
    registry: dict[str, _Progress] = {}
    registry_lock = threading.Lock()

    if config.cors_origin:
        _add_cors(app, config.cors_origin)

    @app.exception_handler(ApiError)
    async def _api_error(_request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.body())

    def _run_dir(run_id: str) -> Path:
        run_dir = root / run_id
        if not (run_dir / "manifest.json").is_file():
            raise ApiError(404, "RUN_NOT_FOUND", f"no completed run {run_id!r}")
        return run_dir

    def _load_run(run_id: str):
        try:
            return store.load_run(_run_dir(run_id)), _run_dir(run_id)
        except store.IncompleteRun:
            raise ApiError(404, "RUN_NOT_FOUND", f"run {run_id!r} is incomplete") from None

    def _make_lm():
        return make_backend(
            config.backend,
            base_url=config.base_url,
            model_name=config.model_name,
            fixture_dir=config.fixture_dir,
            timeout=config.request_timeout,
        )

    @app.get("/health")
    def health():
        return {"schema_version": SCHEMA_VERSION, "status": "ok"}

    @app.get("/runs")
    def list_runs():
        listing = store.list_runs(root)
        with registry_lock:
            active = [
                {"run_id": run_id, **progress.snapshot()}
                for run_id, progress in registry.items()
                if progress.state == "running"
            ]
        return {
            "schema_version": SCHEMA_VERSION,
            "runs": [m.to_json() for m in listing.runs],
            "incomplete": listing.incomplete,
            "active": active,
        }

    @app.post("/runs", status_code=202)
    def start_run(body: dict):
        try:
            vignette = synthesis.Vignette.from_json(body["vignette"])
            k = int(body.get("k", 20))
            seed = int(body.get("seed", 0))
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError(400, "BAD_REQUEST", f"bad run request: {exc}") from exc
        run_config = config
        if body.get("backend"):
            run_config = config.with_overrides(backend=str(body["backend"]))
        run_id = store.make_run_id(vignette.id, k, seed, run_config, run_config.deterministic())
        with registry_lock:
            progress = registry.get(run_id)
            if progress is not None and progress.state == "running":
                raise ApiError(409, "RUN_ACTIVE", f"run {run_id} is already synthesizing")
            if (root / run_id).exists():
                raise ApiError(409, "RUN_EXISTS", f"run {run_id} already exists")
            progress = _Progress(k)
            registry[run_id] = progress

        def job():
            try:
                synthesis.run_pipeline(
                    vignette, k, seed, run_config, _make_lm(), root, progress=progress.update
                )
                progress.state = "complete"
            except synthesis.AllCandidatesFailed:
                progress.state = "complete"
                progress.error = {"code": "NO_VALID_MODELS", "message": "no valid models"}
            except FixtureMissing as exc:
                progress.state = "failed"
                progress.error = {"code": "FIXTURE_MISSING", "message": str(exc)}
            except Exception as exc:  # surfaced via polling; job threads must not die silently
                progress.state = "failed"
                progress.error = {"code": "INTERNAL", "message": str(exc)}

        threading.Thread(target=job, daemon=True).start()
        return {"schema_version": SCHEMA_VERSION, "run_id": run_id}

    @app.get("/runs/{run_id}")
    def run_status(run_id: str):
        with registry_lock:
            progress = registry.get(run_id)
        manifest = None
        manifest_path = root / run_id / "manifest.json"
        if manifest_path.is_file():
            manifest = store.load_manifest(root / run_id).to_json()
        if progress is None and manifest is None:
            raise ApiError(404, "RUN_NOT_FOUND", f"no run {run_id!r}")
        payload = {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "complete": manifest is not None,
            "manifest": manifest,
        }
        if progress is not None:
            payload["progress"] = progress.snapshot()
        return payload

    @app.get("/runs/{run_id}/models")
    def models(run_id: str):
        run, _ = _load_run(run_id)
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "models": [c.summary() for c in run.candidates],
        }

    @app.get("/runs/{run_id}/models/{model_index}")
    def model_detail(run_id: str, model_index: int):
        run, _ = _load_run(run_id)
        candidate = next((c for c in run.candidates if c.index == model_index), None)
        if candidate is None:
            raise ApiError(404, "MODEL_NOT_FOUND", f"no candidate {model_index}")
        editable = {"conditions": [], "numeric_literals": []}
        if candidate.status is synthesis.CandidateStatus.COMPILED:
            program = parse(candidate.patched_source)
            from .ppl.syntax import render_expr

            editable["conditions"] = [
                {
                    "index": i,
                    "text": render_expr(c.expr),
                    "span": [c.span.start, c.span.end],
                }
                for i, c in enumerate(program.conditions)
            ]
            editable["numeric_literals"] = [
                {"span": [n.span.start, n.span.end], "value": n.value}
                for n in program.number_literals()
            ]
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            **candidate.summary(),
            "diagnostics": [d.to_json() for d in candidate.diagnostics],
            "lm_calls": candidate.lm_calls,
            "source": candidate.patched_source,
            "editable": editable,
        }

    @app.get("/runs/{run_id}/models/{model_index}/source")
    def model_source(run_id: str, model_index: int):
        run, _ = _load_run(run_id)
        candidate = next((c for c in run.candidates if c.index == model_index), None)
        if candidate is None:
            raise ApiError(404, "MODEL_NOT_FOUND", f"no candidate {model_index}")
        return PlainTextResponse(candidate.patched_source)

    @app.get("/runs/{run_id}/differential")
    def differential_endpoint(run_id: str, query: str = "1", top: int = 10):
        run, _ = _load_run(run_id)
        if run.no_valid_models:
            raise ApiError(409, "NO_VALID_MODELS", "run produced no valid models")
        key = f"query{query}" if query.isdigit() else query
        dist = run.differentials.get(key)
        if dist is None:
            raise ApiError(404, "QUERY_NOT_FOUND", f"no differential for {key!r}")
        truncated = differential.top_n(dist, top) if top else dist
        payload = truncated.to_json()
        payload["schema_version"] = SCHEMA_VERSION
        return payload

    @app.post("/runs/{run_id}/models/{model_index}/edits")
    def post_edit(run_id: str, model_index: int, body: dict):
        run, run_dir = _load_run(run_id)
        try:
            edit = Edit.from_json(body)
        except (KeyError, ValueError) as exc:
            raise ApiError(422, "EDIT_INVALID", f"bad edit payload: {exc}") from exc
        seed = int(body.get("seed", rng.derive_seed(run.seed, "edit", len(intervene.list_interventions(run_dir)) + 1)))
        try:
            result = intervene.intervene(run, run_dir, model_index, edit, seed, _make_lm())
        except intervene.ModelNotFound as exc:
            raise ApiError(404, "MODEL_NOT_FOUND", str(exc)) from exc
        except intervene.ModelNotCompiled as exc:
            raise ApiError(409, "MODEL_NOT_COMPILED", str(exc)) from exc
        except EditTargetMissing as exc:
            raise ApiError(422, "EDIT_TARGET_MISSING", str(exc)) from exc
        except EditProducesInvalidProgram as exc:
            raise ApiError(
                422,
                "EDIT_INVALID",
                str(exc),
                details=[d.to_json() for d in exc.diagnostics],
            ) from exc
        except MedPplError as exc:
            raise ApiError(422, "EDIT_INVALID", str(exc)) from exc
        payload = result.to_json()
        payload["schema_version"] = SCHEMA_VERSION
        return payload

    @app.get("/runs/{run_id}/interventions")
    def interventions(run_id: str):
        _, run_dir = _load_run(run_id)
        return {
            "schema_version": SCHEMA_VERSION,
            "run_id": run_id,
            "interventions": intervene.list_interventions(run_dir),
        }

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _add_cors(app: FastAPI, origin: str) -> None:
    from fastapi.middleware.cors import CORSMiddleware

    app.add_middleware(
        CORSMiddleware,
        allow_origins=[origin],
        allow_methods=["*"],
        allow_headers=["*"],
    )
