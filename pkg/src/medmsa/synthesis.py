"""The staged synthesis pipeline: vignette -> translation -> sketch -> program
-> checks -> sampled candidate, repeated k times, then canonicalization,
ensembling and persistence.

Every stage generates multiple candidates, scores them with the LM and passes
the argmax forward; a candidate that fails a stage never reaches the next one.
Individual candidate failures are data (statuses), never aborts.
"""

from __future__ import annotations

import enum
import json
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import canonicalize as canon
from . import differential, prompts, rng, store
from .config import PipelineConfig
from .lm import LmBackend, LmRequest, LoggingLm, Stage
from .ppl import (
    Budget,
    Diagnostic,
    MedPplError,
    MedRuntimeError,
    MedSyntaxError,
    SampleSet,
    UnknownIdentifier,
    UnsupportedConstruct,
    parse,
    rejection_sample,
    validate,
)
from .ppl.syntax import called_names, parse_expression

SKIP_MARKER = "// no condition"


class SynthesisError(Exception):
    pass


class NoParsableCandidate(SynthesisError):
    def __init__(self, stage: str, reasons: list[str]):
        self.stage = stage
        self.reasons = reasons
        super().__init__(f"no parsable {stage} candidate: {'; '.join(reasons[:3])}")


class DelimitersMissing(SynthesisError):
    pass


class AllCandidatesFailed(SynthesisError):
    """Raised after the run (with zero valid models) has been persisted."""

    def __init__(self, run: "SynthesisRun", run_dir: Path):
        self.run = run
        self.run_dir = run_dir
        super().__init__(f"run {run.run_id}: no valid models among {run.k} candidates")


class CandidateStatus(str, enum.Enum):
    COMPILED = "Compiled"
    PARSE_FAILED = "ParseFailed"
    VALIDATE_FAILED = "ValidateFailed"
    BUDGET_FAILED = "BudgetFailed"
    SEMANTIC_REJECTED = "SemanticRejected"


@dataclass(frozen=True)
class Vignette:
    id: str
    sentences: tuple
    queries: tuple

    def __post_init__(self):
        if not self.sentences or not self.queries:
            raise ValueError("vignette needs at least one sentence and one query")

    def query_names(self) -> tuple:
        return tuple(f"query{i + 1}" for i in range(len(self.queries)))

    def to_json(self) -> dict:
        return {"id": self.id, "sentences": list(self.sentences), "queries": list(self.queries)}

    @staticmethod
    def from_json(d: dict) -> "Vignette":
        return Vignette(id=d["id"], sentences=tuple(d["sentences"]), queries=tuple(d["queries"]))

    @staticmethod
    def load(path: str | Path) -> "Vignette":
        return Vignette.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Translation:
    condition_statements: tuple  # expression text, one per conditioning sentence
    query_expressions: tuple
    skipped_sentences: tuple  # indices of sentences judged non-conditioning
    lm_score: float

    @property
    def required_functions(self) -> set:
        names: set = set()
        for text in self.condition_statements + self.query_expressions:
            names |= called_names(parse_expression(text))
        return names

    def block_text(self) -> str:
        lines = ["<START_TRANSLATION>", "// CONDITIONS"]
        statement = iter(self.condition_statements)
        total = len(self.condition_statements) + len(self.skipped_sentences)
        for i in range(total):
            lines.append(SKIP_MARKER if i in self.skipped_sentences else f"condition({next(statement)})")
        lines.append("")
        lines.append("// QUERIES")
        lines.extend(self.query_expressions)
        lines.append("<END_TRANSLATION>")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "condition_statements": list(self.condition_statements),
            "query_expressions": list(self.query_expressions),
            "skipped_sentences": list(self.skipped_sentences),
            "required_functions": sorted(self.required_functions),
            "lm_score": self.lm_score,
        }

    @staticmethod
    def from_json(d: dict) -> "Translation":
        return Translation(
            condition_statements=tuple(d["condition_statements"]),
            query_expressions=tuple(d["query_expressions"]),
            skipped_sentences=tuple(d["skipped_sentences"]),
            lm_score=d["lm_score"],
        )


@dataclass(frozen=True)
class Sketch:
    prose: str
    concept_trace: tuple  # of (variable, tuple of dependencies)
    lm_score: float

    def block_text(self) -> str:
        lines = ["<START_SCRATCHPAD>", self.prose.strip(), "", "<START_CONCEPT_TRACE>"]
        for name, deps in self.concept_trace:
            lines.append(f"- {name}")
            if deps:
                lines.append(f"  - depends on: {', '.join(deps)}")
        lines.append("<END_CONCEPT_TRACE>")
        lines.append("<END_SCRATCHPAD>")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "prose": self.prose,
            "concept_trace": [[name, list(deps)] for name, deps in self.concept_trace],
            "lm_score": self.lm_score,
        }

    @staticmethod
    def from_json(d: dict) -> "Sketch":
        return Sketch(
            prose=d["prose"],
            concept_trace=tuple((name, tuple(deps)) for name, deps in d["concept_trace"]),
            lm_score=d["lm_score"],
        )


@dataclass(frozen=True)
class ModelCandidate:
    index: int  # 1..k
    translation: Translation | None
    sketch: Sketch | None
    source: str
    patched_source: str
    semantic_score: float
    status: CandidateStatus
    diagnostics: tuple
    sample_set: SampleSet | None
    lm_calls: dict = field(default_factory=dict)
    init_seconds: float = 0.0
    init_proposals: int = 0

    @property
    def valid(self) -> bool:
        return (
            self.status is CandidateStatus.COMPILED
            and self.sample_set is not None
            and self.sample_set.accepted_count > 0
        )

    def summary(self) -> dict:
        return {
            "index": self.index,
            "status": self.status.value,
            "semantic_score": self.semantic_score,
            "valid": self.valid,
            "accepted_count": self.sample_set.accepted_count if self.sample_set else 0,
        }


@dataclass(frozen=True)
class SynthesisRun:
    run_id: str
    vignette: Vignette
    k: int
    seed: int
    candidates: tuple
    config: PipelineConfig
    mapping: canon.CategoryMapping | None
    differentials: dict  # query-name -> DifferentialDistribution
    started_at: float
    finished_at: float

    def valid_models(self) -> list[ModelCandidate]:
        return [c for c in self.candidates if c.valid]

    @property
    def no_valid_models(self) -> bool:
        return not self.valid_models()


# ---------------------------------------------------------------------------
# Stage helpers


_SCORE_RE = re.compile(r"SCORE:\s*([0-9]*\.?[0-9]+)")


def extract_score(text: str) -> float:
    """Last SCORE: <number> line, clamped to [0, 1]; absent scores count 0."""
    matches = _SCORE_RE.findall(text)
    if not matches:
        return 0.0
    try:
        value = float(matches[-1])
    except ValueError:
        return 0.0
    return min(max(value, 0.0), 1.0)


def _block(text: str, start: str, end: str) -> str | None:
    i = text.find(start)
    if i < 0:
        return None
    j = text.find(end, i + len(start))
    if j < 0:
        return None
    return text[i + len(start) : j].strip("\n")


def _score_candidates(vignette: Vignette, kind: str, artifacts: list[str], lm: LmBackend) -> list[float]:
    scores = []
    for artifact in artifacts:
        prompt = prompts.render_score(list(vignette.sentences), list(vignette.queries), kind, artifact)
        response = lm.complete(LmRequest(stage=Stage.SCORE, prompt=prompt))
        scores.append(extract_score(response.text))
    return scores


def _argmax(scores: list[float]) -> int:
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return best


def parse_translation_block(text: str, n_sentences: int) -> tuple:
    """Returns (condition_statements, query_expressions, skipped). Raises
    ValueError when the block does not follow the contract."""
    block = _block(text, "<START_TRANSLATION>", "<END_TRANSLATION>")
    if block is None:
        block = text
    lines = [line.strip() for line in block.splitlines()]
    lines = [line for line in lines if line]
    try:
        cond_at = lines.index("// CONDITIONS")
        query_at = lines.index("// QUERIES")
    except ValueError:
        raise ValueError("missing // CONDITIONS or // QUERIES marker") from None
    condition_lines = lines[cond_at + 1 : query_at]
    query_lines = lines[query_at + 1 :]
    statements: list[str] = []
    skipped: list[int] = []
    for i, line in enumerate(condition_lines):
        if line == SKIP_MARKER:
            skipped.append(i)
            continue
        match = re.fullmatch(r"condition\((.*)\)\s*;?", line)
        if not match:
            raise ValueError(f"line {line!r} is neither a condition statement nor {SKIP_MARKER!r}")
        inner = match.group(1)
        parse_expression(inner)  # must parse; names stay unresolved here
        statements.append(inner)
    if not query_lines:
        raise ValueError("no query expressions")
    queries = []
    for line in query_lines:
        expr_text = line.rstrip(";").strip()
        parse_expression(expr_text)
        queries.append(expr_text)
    if len(condition_lines) != n_sentences:
        raise ValueError(
            f"expected one line per sentence ({n_sentences}), got {len(condition_lines)}"
        )
    return tuple(statements), tuple(queries), tuple(skipped)


def translate(vignette: Vignette, lm: LmBackend, n_candidates: int, seed: int) -> Translation:
    """Best-of-n translation. Ties break toward the lowest candidate index."""
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    prompt = prompts.render_translate(list(vignette.sentences), list(vignette.queries))
    responses = lm.complete_many(LmRequest(stage=Stage.TRANSLATE, prompt=prompt), n_candidates)
    parsed: list[tuple] = []
    reasons: list[str] = []
    for response in responses:
        try:
            parsed.append(parse_translation_block(response.text, len(vignette.sentences)))
        except (ValueError, MedPplError) as exc:
            parsed.append(None)
            reasons.append(str(exc))
    if all(p is None for p in parsed):
        raise NoParsableCandidate("translation", reasons)
    translations = [
        Translation(
            condition_statements=p[0], query_expressions=p[1], skipped_sentences=p[2], lm_score=0.0
        )
        if p is not None
        else None
        for p in parsed
    ]
    artifacts = [t.block_text() for t in translations if t is not None]
    live_indices = [i for i, t in enumerate(translations) if t is not None]
    scores = _score_candidates(vignette, "translation", artifacts, lm)
    best_live = _argmax(scores)
    chosen = translations[live_indices[best_live]]
    return replace(chosen, lm_score=scores[best_live])


def parse_sketch_block(text: str) -> tuple:
    block = _block(text, "<START_SCRATCHPAD>", "<END_SCRATCHPAD>")
    if block is None:
        raise ValueError("missing scratchpad delimiters")
    trace_text = _block(block, "<START_CONCEPT_TRACE>", "<END_CONCEPT_TRACE>")
    if trace_text is None:
        raise ValueError("missing concept trace delimiters")
    prose = block[: block.index("<START_CONCEPT_TRACE>")].strip()
    trace: list[tuple] = []
    for raw_line in trace_text.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        dep_match = re.fullmatch(r"-\s*depends on:\s*(.+)", line)
        if dep_match and raw_line.startswith((" ", "\t")) and trace:
            deps = tuple(d.strip() for d in dep_match.group(1).split(",") if d.strip())
            name, _ = trace[-1]
            trace[-1] = (name, deps)
            continue
        name_match = re.fullmatch(r"-\s*([A-Za-z_][A-Za-z0-9_]*)", line)
        if not name_match:
            raise ValueError(f"unparsable concept-trace line {line!r}")
        trace.append((name_match.group(1), ()))
    if not trace:
        raise ValueError("empty concept trace")
    declared = {name for name, _ in trace}
    for name, deps in trace:
        for dep in deps:
            if dep not in declared:
                raise ValueError(f"trace variable {name!r} depends on undeclared {dep!r}")
    return prose, tuple(trace)


def sketch(
    vignette: Vignette, translation: Translation, lm: LmBackend, n_candidates: int, seed: int
) -> Sketch:
    """Best-of-n sketch. Candidates whose trace misses a required function or
    references an undeclared variable are discarded before scoring."""
    if n_candidates < 1:
        raise ValueError("n_candidates must be >= 1")
    prompt = prompts.render_sketch(
        list(vignette.sentences), list(vignette.queries), translation.block_text()
    )
    responses = lm.complete_many(LmRequest(stage=Stage.SKETCH, prompt=prompt), n_candidates)
    required = translation.required_functions
    sketches: list[Sketch | None] = []
    reasons: list[str] = []
    for response in responses:
        try:
            prose, trace = parse_sketch_block(response.text)
            declared = {name for name, _ in trace}
            missing = required - declared
            if missing:
                raise ValueError(f"trace missing required functions: {sorted(missing)}")
            sketches.append(Sketch(prose=prose, concept_trace=trace, lm_score=0.0))
        except ValueError as exc:
            sketches.append(None)
            reasons.append(str(exc))
    if all(s is None for s in sketches):
        raise NoParsableCandidate("sketch", reasons)
    live_indices = [i for i, s in enumerate(sketches) if s is not None]
    artifacts = [sketches[i].block_text() for i in live_indices]
    scores = _score_candidates(vignette, "sketch", artifacts, lm)
    best_live = _argmax(scores)
    chosen = sketches[live_indices[best_live]]
    return replace(chosen, lm_score=scores[best_live])


def synthesize_program(
    vignette: Vignette, translation: Translation, sketch_: Sketch, lm: LmBackend
) -> str:
    """One low-temperature completion; returns the text between the model
    delimiters verbatim."""
    prompt = prompts.render_code(
        list(vignette.sentences),
        list(vignette.queries),
        translation.block_text(),
        sketch_.block_text(),
    )
    response = lm.complete(
        LmRequest(stage=Stage.SYNTHESIZE_CODE, prompt=prompt, max_tokens=2048)
    )
    source = _block(response.text, "<START_MODEL>", "<END_MODEL>")
    if source is None:
        raise DelimitersMissing("completion lacks <START_MODEL>/<END_MODEL> delimiters")
    return source


_COMMENTED_CONDITION = re.compile(r"^(\s*)//\s*(condition\(.*\))\s*;?\s*$")


def patch_conditions(source: str) -> str:
    """Uncomment lines that are exactly a commented-out top-level condition
    statement; leave everything else untouched. Idempotent."""
    out_lines = []
    for line in source.splitlines():
        match = _COMMENTED_CONDITION.match(line)
        if match:
            indent, statement = match.groups()
            inner = statement[len("condition(") : -1]
            try:
                parse_expression(inner)
            except MedPplError:
                out_lines.append(line)
                continue
            out_lines.append(indent + statement)
        else:
            out_lines.append(line)
    trailer = "\n" if source.endswith("\n") else ""
    return "\n".join(out_lines) + trailer


def check_candidate(
    source: str,
    lm: LmBackend,
    budget: Budget,
    *,
    vignette: Vignette,
    config: PipelineConfig,
    seed: int,
) -> tuple[CandidateStatus, float, list[Diagnostic], dict]:
    """The three checks, in order: LM semantic sensibility, parse+validate,
    and the can-inference-initialize budget check. First failure decides."""
    prompt = prompts.render_score(list(vignette.sentences), list(vignette.queries), "model", source)
    response = lm.complete(LmRequest(stage=Stage.SCORE, prompt=prompt))
    semantic_score = extract_score(response.text)
    stats = {"init_seconds": 0.0, "init_proposals": 0}
    if semantic_score < config.semantic_threshold:
        diag = Diagnostic(
            "SemanticRejected",
            f"semantic score {semantic_score} below threshold {config.semantic_threshold}",
        )
        return CandidateStatus.SEMANTIC_REJECTED, semantic_score, [diag], stats

    try:
        program = parse(source)
    except (MedSyntaxError, UnknownIdentifier, UnsupportedConstruct) as exc:
        diag = Diagnostic(type(exc).__name__, str(exc), getattr(exc, "line", 0), getattr(exc, "col", 0))
        return CandidateStatus.PARSE_FAILED, semantic_score, [diag], stats

    diagnostics = validate(program)
    expected = set(vignette.query_names())
    missing = expected - set(program.query_names)
    if missing:
        diagnostics = diagnostics + [
            Diagnostic("QueryKeyMissing", f"query record lacks keys {sorted(missing)}")
        ]
    if diagnostics:
        return CandidateStatus.VALIDATE_FAILED, semantic_score, diagnostics, stats

    try:
        init = rejection_sample(program, 1, budget, seed=seed, model_id="init-check")
    except MedRuntimeError as exc:
        diag = Diagnostic("RuntimeError", f"initialization crashed: {exc}")
        return CandidateStatus.BUDGET_FAILED, semantic_score, [diag], stats
    stats = {"init_seconds": init.wall_time, "init_proposals": init.proposed_count}
    if init.accepted_count < 1:
        diag = Diagnostic(
            "BudgetExhausted",
            f"no accepted sample within budget ({init.proposed_count} proposals)",
        )
        return CandidateStatus.BUDGET_FAILED, semantic_score, [diag], stats
    return CandidateStatus.COMPILED, semantic_score, [], stats


# ---------------------------------------------------------------------------
# Full pipeline


def run_pipeline(
    vignette: Vignette,
    k: int,
    seed: int,
    config: PipelineConfig,
    lm: LmBackend,
    out_root: str | Path,
    progress=None,
) -> tuple[SynthesisRun, Path]:
    """Synthesize k candidates, sample the compiled ones, canonicalize,
    ensemble, persist. Returns (run, run_dir); raises AllCandidatesFailed
    after persisting when no candidate is valid."""
    if k < 1:
        raise ValueError("k must be >= 1")
    deterministic = config.deterministic()
    clock = (lambda: 0.0) if deterministic else time.time
    started_at = clock()
    run_id = store.make_run_id(vignette.id, k, seed, config, deterministic)
    report = progress if progress is not None else (lambda *args: None)

    init_budget = Budget(
        max_seconds=config.init_budget_seconds, max_proposals=config.init_budget_max_proposals
    )
    sample_budget = Budget(
        max_seconds=config.sampling_max_seconds, max_proposals=config.sampling_max_proposals
    )

    shared_translation: Translation | None = None
    candidates: list[ModelCandidate] = []
    for index in range(1, k + 1):
        log = LoggingLm(lm)
        candidate = _run_candidate(
            vignette,
            index,
            seed,
            config,
            log,
            init_budget,
            sample_budget,
            shared_translation,
            report,
            deterministic,
        )
        if config.share_translation and shared_translation is None and candidate.translation:
            shared_translation = candidate.translation
        candidates.append(candidate)
        report(index, "done", candidate.status.value)

    valid = [c for c in candidates if c.valid]
    mapping = None
    differentials: dict = {}
    if valid:
        raw_categories: set = set()
        for candidate in valid:
            for query in vignette.query_names():
                for value in candidate.sample_set.queries.get(query, []):
                    if isinstance(value, str):
                        raw_categories.add(value)
        overrides = canon.load_overrides(config.overrides_path)
        if raw_categories:
            mapping = canon.build_mapping(raw_categories, lm, overrides)
        else:
            mapping = canon.CategoryMapping(entries={}, provenance={}, source_prompt_hash="")
        for i, query in enumerate(vignette.query_names()):
            differentials[query] = differential.ensemble_sample_sets(
                [c.sample_set for c in valid], query, mapping, question=vignette.queries[i]
            )

    run = SynthesisRun(
        run_id=run_id,
        vignette=vignette,
        k=k,
        seed=seed,
        candidates=tuple(candidates),
        config=config,
        mapping=mapping,
        differentials=differentials,
        started_at=started_at,
        finished_at=clock(),
    )
    run_dir = store.persist_run(run, out_root)
    if run.no_valid_models:
        raise AllCandidatesFailed(run, run_dir)
    return run, run_dir


def _run_candidate(
    vignette: Vignette,
    index: int,
    seed: int,
    config: PipelineConfig,
    log: LoggingLm,
    init_budget: Budget,
    sample_budget: Budget,
    shared_translation: Translation | None,
    report,
    deterministic: bool,
) -> ModelCandidate:
    def failed(stage: str, exc: Exception, translation=None, sketch_=None, source="", patched=""):
        diag = Diagnostic(type(exc).__name__, f"{stage}: {exc}")
        return ModelCandidate(
            index=index,
            translation=translation,
            sketch=sketch_,
            source=source,
            patched_source=patched,
            semantic_score=0.0,
            status=CandidateStatus.PARSE_FAILED,
            diagnostics=(diag,),
            sample_set=None,
            lm_calls=log.stage_counts(),
        )

    report(index, "translate", "running")
    if shared_translation is not None:
        translation = shared_translation
    else:
        try:
            translation = translate(vignette, log, config.n_translations, seed)
        except NoParsableCandidate as exc:
            return failed("translate", exc)

    report(index, "sketch", "running")
    try:
        sketch_ = sketch(vignette, translation, log, config.n_sketches, seed)
    except NoParsableCandidate as exc:
        return failed("sketch", exc, translation=translation)

    report(index, "code", "running")
    try:
        source = synthesize_program(vignette, translation, sketch_, log)
    except DelimitersMissing as exc:
        return failed("code", exc, translation=translation, sketch_=sketch_)

    patched = patch_conditions(source)

    report(index, "check", "running")
    status, semantic_score, diagnostics, stats = check_candidate(
        patched,
        log,
        init_budget,
        vignette=vignette,
        config=config,
        seed=rng.derive_seed(seed, index, "init"),
    )

    sample_set = None
    if status is CandidateStatus.COMPILED:
        report(index, "sample", "running")
        program = parse(patched)
        try:
            sample_set = rejection_sample(
                program,
                config.samples_per_model,
                sample_budget,
                seed=rng.derive_seed(seed, index, "sample"),
                model_id=f"candidate-{index}",
            )
        except MedRuntimeError as exc:
            status = CandidateStatus.BUDGET_FAILED
            diagnostics = list(diagnostics) + [Diagnostic("RuntimeError", f"sampling crashed: {exc}")]
        if sample_set is not None and deterministic:
            sample_set = sample_set.with_wall_time(0.0)

    init_seconds = 0.0 if deterministic else stats["init_seconds"]
    return ModelCandidate(
        index=index,
        translation=translation,
        sketch=sketch_,
        source=source,
        patched_source=patched,
        semantic_score=semantic_score,
        status=status,
        diagnostics=tuple(diagnostics),
        sample_set=sample_set,
        lm_calls=log.stage_counts(),
        init_seconds=init_seconds,
        init_proposals=stats["init_proposals"],
    )
