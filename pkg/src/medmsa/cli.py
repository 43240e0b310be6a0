"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 run completed with
no valid models. With --json, diagnostics go to stderr as JSON lines.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import differential, intervene, store, synthesis
from .config import PipelineConfig
from .lm import FixtureMissing, LmError, make_backend
from .ppl import (
    Budget,
    Edit,
    MedPplError,
    enumerate_program,
    parse,
    rejection_sample,
    validate,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_NO_VALID_MODELS = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _diag(args, payload: dict) -> None:
    if getattr(args, "json", False):
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    else:
        sys.stderr.write(f"{payload.get('level', 'info')}: {payload.get('message', '')}\n")


def _load_config(args) -> PipelineConfig:
    if getattr(args, "config", None):
        config_path = Path(args.config)
        config = PipelineConfig.load(config_path)
        config = _resolve_paths(config, config_path.parent)
    else:
        config = PipelineConfig()
    if getattr(args, "backend", None):
        config = config.with_overrides(backend=args.backend)
    if getattr(args, "fixtures", None):
        config = config.with_overrides(fixture_dir=str(Path(args.fixtures).resolve()))
    return config


def _resolve_paths(config: PipelineConfig, base: Path) -> PipelineConfig:
    updates = {}
    for field in ("fixture_dir", "overrides_path"):
        value = getattr(config, field)
        if value and not Path(value).is_absolute():
            updates[field] = str((base / value).resolve())
    return config.with_overrides(**updates) if updates else config


def _make_lm(config: PipelineConfig):
    return make_backend(
        config.backend,
        base_url=config.base_url,
        model_name=config.model_name,
        fixture_dir=config.fixture_dir,
        timeout=config.request_timeout,
    )


def cmd_run(args) -> int:
    config = _load_config(args)
    vignette = synthesis.Vignette.load(args.vignette)
    try:
        run, run_dir = synthesis.run_pipeline(
            vignette,
            args.k,
            args.seed,
            config,
            _make_lm(config),
            args.out,
            progress=_progress_printer(args),
        )
    except synthesis.AllCandidatesFailed as exc:
        _diag(args, {"level": "error", "code": "NO_VALID_MODELS", "message": str(exc)})
        print(exc.run_dir)
        return EXIT_NO_VALID_MODELS
    except (FixtureMissing, LmError, store.StoreError) as exc:
        _diag(args, {"level": "error", "code": type(exc).__name__, "message": str(exc)})
        return EXIT_RUNTIME
    valid = len(run.valid_models())
    _diag(args, {"level": "info", "message": f"{valid}/{run.k} candidates valid"})
    print(run_dir)
    return EXIT_OK


def _progress_printer(args):
    if not getattr(args, "verbose", False):
        return None

    def report(index, stage, status):
        _diag(args, {"level": "progress", "candidate": index, "stage": stage, "message": status})

    return report


def cmd_differential(args) -> int:
    run_dir = Path(args.run)
    try:
        run = store.load_run(run_dir)
    except store.StoreError as exc:
        _diag(args, {"level": "error", "code": type(exc).__name__, "message": str(exc)})
        return EXIT_RUNTIME
    if run.no_valid_models:
        _diag(args, {"level": "error", "code": "NO_VALID_MODELS", "message": "run has no valid models"})
        return EXIT_NO_VALID_MODELS
    key = f"query{args.query}"
    dist = run.differentials.get(key)
    if dist is None:
        _diag(args, {"level": "error", "code": "QUERY_NOT_FOUND", "message": f"no differential for {key}"})
        return EXIT_RUNTIME
    truncated = differential.top_n(dist, args.top)
    if args.json:
        print(json.dumps(truncated.to_json(), indent=2, sort_keys=True))
    else:
        question = f" :: {dist.question}" if dist.question else ""
        print(f"{key}{question} ({dist.n_models} models, {dist.total_samples} samples)")
        print(differential.render_bars(truncated))
    return EXIT_OK


def cmd_edit(args) -> int:
    run_dir = Path(args.run)
    try:
        run = store.load_run(run_dir)
        edit = Edit.from_json(json.loads(Path(args.edit).read_text()))
        config = run.config
        seed = args.seed if args.seed is not None else run.seed + 1
        result = intervene.intervene(run, run_dir, args.model, edit, seed, _make_lm(config))
    except (MedPplError, intervene.InterventionError, store.StoreError, ValueError) as exc:
        _diag(args, {"level": "error", "code": type(exc).__name__, "message": str(exc)})
        return EXIT_RUNTIME
    if args.json:
        print(json.dumps(result.to_json(), indent=2, sort_keys=True))
        return EXIT_OK
    print(f"intervention {result.new_version_id} on {result.base_model_id}")
    if result.budget_exhausted:
        print("warning: no accepted samples within budget; after-distribution is empty")
    for query, before in result.before.items():
        after = result.after[query]
        print(f"\n{query} before:")
        print(differential.render_bars(before))
        print(f"{query} after:")
        print(differential.render_bars(after) if after.entries else "(no accepted samples)")
    return EXIT_OK


def cmd_sample(args) -> int:
    try:
        program = parse(Path(args.program).read_text())
        diagnostics = validate(program)
        if diagnostics:
            for d in diagnostics:
                _diag(args, {"level": "error", "code": d.code, "message": d.message})
            return EXIT_RUNTIME
        budget = Budget(max_seconds=args.max_seconds, max_proposals=args.max_proposals)
        sample_set = rejection_sample(
            program, args.samples, budget, seed=args.seed, model_id=Path(args.program).stem
        )
    except MedPplError as exc:
        _diag(args, {"level": "error", "code": type(exc).__name__, "message": str(exc)})
        return EXIT_RUNTIME
    if args.json:
        print(json.dumps(sample_set.to_json(), sort_keys=True))
        return EXIT_OK
    print(
        f"accepted {sample_set.accepted_count}/{sample_set.proposed_count} proposals"
        + (" (budget exhausted)" if sample_set.budget_exhausted else "")
    )
    for query in program.query_names:
        freqs = sample_set.frequencies(query)
        top = sorted(freqs.items(), key=lambda kv: (-kv[1], kv[0]))[:10]
        rendered = ", ".join(f"{k}={v:.4f}" for k, v in top)
        print(f"{query}: {rendered}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    try:
        program = parse(Path(args.program).read_text())
        dist = enumerate_program(program, path_cap=args.path_cap)
    except MedPplError as exc:
        _diag(args, {"level": "error", "code": type(exc).__name__, "message": str(exc)})
        return EXIT_RUNTIME
    if args.json:
        print(json.dumps(dist.to_json(), sort_keys=True))
        return EXIT_OK
    for query, values in dist.queries.items():
        for value, probability in sorted(values.items(), key=lambda kv: (-kv[1], kv[0])):
            print(f"P({query}={value})={probability}")
    print(f"evidence={dist.evidence} paths={dist.paths}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_config(args)
    app = create_app(args.root, config, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="medmsa", description="Synthesize and inspect causal diagnosis models.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="synthesize k models for a vignette and persist the run")
    run.add_argument("--vignette", required=True, help="vignette JSON file")
    run.add_argument("--k", type=int, default=20)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--backend", choices=["replay", "http", "record"])
    run.add_argument("--fixtures", help="fixture directory for replay/record")
    run.add_argument("--config", help="pipeline config JSON")
    run.add_argument("--out", required=True, help="runs root directory")
    run.add_argument("--json", action="store_true")
    run.add_argument("--verbose", action="store_true")
    run.set_defaults(fn=cmd_run)

    diff = sub.add_parser("differential", help="print a run's ensembled differential")
    diff.add_argument("--run", required=True, help="run directory")
    diff.add_argument("--query", type=int, default=1, help="1-based query index")
    diff.add_argument("--top", type=int, default=10)
    diff.add_argument("--json", action="store_true")
    diff.set_defaults(fn=cmd_differential)

    edit = sub.add_parser("edit", help="apply a point edit to a model and rerun inference")
    edit.add_argument("--run", required=True)
    edit.add_argument("--model", required=True, help="candidate index or version id (v1, v2, ...)")
    edit.add_argument("--edit", required=True, help="edit JSON file")
    edit.add_argument("--seed", type=int)
    edit.add_argument("--json", action="store_true")
    edit.set_defaults(fn=cmd_edit)

    sample = sub.add_parser("sample", help="rejection-sample a MedPPL program")
    sample.add_argument("--program", required=True)
    sample.add_argument("--samples", type=int, default=5000)
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--max-seconds", type=float, default=None)
    sample.add_argument("--max-proposals", type=int, default=10_000_000)
    sample.add_argument("--json", action="store_true")
    sample.set_defaults(fn=cmd_sample)

    enum = sub.add_parser("enumerate", help="exactly enumerate a discrete MedPPL program")
    enum.add_argument("--program", required=True)
    enum.add_argument("--path-cap", type=int, default=10_000_000)
    enum.add_argument("--json", action="store_true")
    enum.set_defaults(fn=cmd_enumerate)

    serve = sub.add_parser("serve", help="serve runs over HTTP")
    serve.add_argument("--root", required=True, help="runs root directory")
    serve.add_argument("--port", type=int, default=8765)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--config", help="pipeline config JSON")
    serve.add_argument("--ui", help="built web UI directory to serve at /ui")
    serve.set_defaults(fn=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_RUNTIME
    except json.JSONDecodeError as exc:
        sys.stderr.write(f"error: bad JSON input: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
