"""Build the shipped LM fixtures by running the real pipeline in record mode
against a deterministic scripted backend.

The scripted backend plays the role of the live LM: per candidate slot it
emits translations, sketches, models (with planned failure modes: broken
syntax, arity errors, unsatisfiable conditions, commented-out conditions,
implausible medicine) and scores, so replayed runs reproduce the partial-
compile regime (9/15/8/10 of 20) and the qualitative differential structure.
Run from the repo root:  python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from medmsa import canonicalize as canon  # noqa: E402
from medmsa import synthesis  # noqa: E402
from medmsa.config import PipelineConfig  # noqa: E402
from medmsa.lm import LmBackend, LmResponse, RecordBackend, Stage, fixture_key  # noqa: E402
from medmsa.synthesis import Translation, Vignette, parse_translation_block  # noqa: E402

FIXTURE_DIR = REPO / "fixtures" / "lm"
N_TRANSLATIONS = 4
N_SKETCHES = 3

# Failure plan per vignette: 1-based candidate slots.
PLANS = {
    "vignette1": {
        "translate": {3},
        "sketch": {7},
        "parse": {1, 10, 15},
        "validate": {5, 18},
        "budget": {9, 14},
        "semantic": {12, 20},
        "commented": {4},
    },
    "vignette2": {
        "translate": {6},
        "sketch": set(),
        "parse": {11},
        "validate": {14},
        "budget": {17},
        "semantic": {19},
        "commented": {2, 9},
    },
    "vignette3": {
        "translate": {2},
        "sketch": {5},
        "parse": {7, 11, 16},
        "validate": {3, 9, 18},
        "budget": {13, 20},
        "semantic": {6, 15},
        "commented": {4},
    },
    "vignette4": {
        "translate": {5},
        "sketch": {9},
        "parse": {2, 12},
        "validate": {7, 16},
        "budget": {3, 19},
        "semantic": {11, 18},
        "commented": {4},
    },
}

# v4 slots whose models include a collapsed-lung category, by surface name.
PNEUMO_SLOTS = {1: "pneumothorax", 6: "collapsed_lung", 13: "pneumothorax", 17: "collapsed_lung"}

THESAURUS = {
    "collapsed lung": "pneumothorax",
    "acid reflux": "heartburn",
    "musculoskeletal issue": "muscle strain",
}


def _survivors(vid: str, failed_stages: tuple) -> list[int]:
    excluded = set()
    for stage in failed_stages:
        excluded |= PLANS[vid][stage]
    return [slot for slot in range(1, 64) if slot not in excluded]


def vignette_of(prompt: str) -> str:
    if "clicking" in prompt:
        return "vignette4"
    if "teenager" in prompt:
        return "vignette3"
    if "over 60" in prompt:
        return "vignette2"
    if "Sean has chest pain." in prompt:
        return "vignette1"
    raise AssertionError("prompt does not mention a known vignette")


# ---------------------------------------------------------------------------
# Translations


def canonical_translation(vid: str) -> list[str]:
    base = ["condition(has_chest_pain('sean'))", "condition(feels_lightheaded('sean'))"]
    if vid == "vignette2":
        base += ["condition(is_over_60('sean'))", "condition(!does_exercise('sean'))"]
    elif vid in ("vignette3", "vignette4"):
        base += ["condition(is_teenager('sean'))", "condition(is_athlete('sean'))"]
    if vid == "vignette4":
        base += ["condition(has_clicking_noise_in_chest('sean'))"]
    return base


QUERY_EXPRS = ["is_having_heart_attack('sean')", "has_ailment('sean')"]


def translation_block(conditions: list[str]) -> str:
    lines = ["<START_TRANSLATION>", "// CONDITIONS", *conditions, "", "// QUERIES", *QUERY_EXPRS, "<END_TRANSLATION>"]
    return "\n".join(lines)


def variant_translation(vid: str) -> list[str]:
    # plausible but worse: drops the lightheadedness observation
    conditions = canonical_translation(vid)
    conditions[1] = "// no condition"
    return conditions


# ---------------------------------------------------------------------------
# Sketches


def trace_for(vid: str, extra: list[str] | None = None) -> list[tuple[str, list[str]]]:
    demo = {
        "vignette1": [],
        "vignette2": ["is_over_60", "does_exercise"],
        "vignette3": ["is_teenager", "is_athlete"],
        "vignette4": ["is_teenager", "is_athlete"],
    }[vid]
    symptoms = ["has_chest_pain", "feels_lightheaded"]
    if vid == "vignette4":
        symptoms.append("has_clicking_noise_in_chest")
    trace: list[tuple[str, list[str]]] = [(name, []) for name in demo]
    trace.append(("has_ailment", list(demo)))
    trace.extend((s, ["has_ailment"]) for s in symptoms)
    trace.append(("is_having_heart_attack", ["has_ailment"]))
    for name in extra or []:
        trace.append((name, ["has_ailment"]))
    return trace


PROSE = {
    "vignette1": (
        "Sean presents with chest pain and lightheadedness and nothing else is known. "
        "Both symptoms are shared by cardiac, gastric, musculoskeletal and anxiety-related causes, "
        "so the model should spread probability across a handful of common conditions with a catch-all."
    ),
    "vignette2": (
        "Sean is over 60 and sedentary, which raises the prior probability of an acute cardiac cause "
        "relative to the base population. Chest pain with lightheadedness in this profile should "
        "weight heart attack up while keeping gastric and musculoskeletal explanations in play."
    ),
    "vignette3": (
        "Sean is a teenage athlete, so an acute cardiac event is a priori very unlikely. The same "
        "symptoms are better explained by a panic attack, reflux or exertion-related muscle strain, "
        "with a catch-all for everything else."
    ),
    "vignette4": (
        "Sean is a teenage athlete with chest pain, lightheadedness and a loud clicking or crunching "
        "noise from the chest. The noise is atypical and points at structural causes such as a "
        "collapsed lung despite its very low base rate, alongside musculoskeletal explanations."
    ),
}


def sketch_block(vid: str, extra: list[str] | None = None, prose_suffix: str = "") -> str:
    lines = ["<START_SCRATCHPAD>", PROSE[vid] + prose_suffix, "", "<START_CONCEPT_TRACE>"]
    for name, deps in trace_for(vid, extra):
        lines.append(f"- {name}")
        if deps:
            lines.append(f"  - depends on: {', '.join(deps)}")
    lines += ["<END_CONCEPT_TRACE>", "<END_SCRATCHPAD>"]
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Models


def _sym_line(fn: str, table: dict[str, float]) -> str:
    clauses = [f"((has_ailment(patient) == '{label}') && flip({p}))" for label, p in table.items()]
    body = " ||\n          ".join(clauses)
    return (
        f"var {fn} = mem(function(patient){{\n  return ({body});\n}})"
    )


def model_source(vid: str, slot: int) -> str:
    """The 'good' model family: demographic priors, a categorical ailment, a
    noisy-or symptom layer, two queries. Deterministic per (vignette, slot)."""
    reflux = "acid_reflux" if slot % 2 == 0 else "heartburn"
    muscle = "muscle_strain" if slot % 3 else "musculoskeletal_issue"
    jitter = (slot % 5) * 0.01

    defs: list[str] = []
    conditions = ["condition(has_chest_pain('sean'))", "condition(feels_lightheaded('sean'))"]
    labels = ["heart_attack", "panic_attack", reflux, muscle, "other"]

    if vid == "vignette1":
        ha_prob = f"{0.08 + jitter}"
        priors = [ha_prob, "0.2", "0.22", "0.2", "0.15"]
    elif vid == "vignette2":
        defs += [
            "var is_over_60 = mem(function(patient){\n  return flip(0.5)\n})",
            "var does_exercise = mem(function(patient){\n  return flip(0.5)\n})",
        ]
        conditions += ["condition(is_over_60('sean'))", "condition(!does_exercise('sean'))"]
        defs_prior = (
            f"  var base_risk = is_over_60(patient) ? {0.3 + jitter} : 0.06;\n"
            "  var heart_attack_prob = does_exercise(patient) ? base_risk * 0.4 : base_risk;"
        )
        priors = ["heart_attack_prob", "0.15", "0.18", "0.16", "0.1"]
    else:
        defs += [
            "var is_teenager = mem(function(patient){\n  return flip(0.5)\n})",
            "var is_athlete = mem(function(patient){\n  return flip(0.5)\n})",
        ]
        conditions += ["condition(is_teenager('sean'))", "condition(is_athlete('sean'))"]
        defs_prior = (
            f"  var base_risk = is_teenager(patient) ? 0.008 : {0.1 + jitter};\n"
            "  var heart_attack_prob = is_athlete(patient) ? base_risk * 0.5 : base_risk;"
        )
        priors = ["heart_attack_prob", "0.3", "0.12", "0.22", "0.14"]

    pneumo = PNEUMO_SLOTS.get(slot) if vid == "vignette4" else None
    if vid == "vignette4":
        conditions += ["condition(has_clicking_noise_in_chest('sean'))"]
        if pneumo:
            labels.insert(4, pneumo)
            priors.insert(4, "0.02")

    prior_lines = "\n".join(
        [
            "var has_ailment = mem(function(patient){",
            f"  var labels = [{', '.join(repr(l) for l in labels)}];",
        ]
        + ([defs_prior] if vid != "vignette1" else [])
        + [
            f"  var priors = [{', '.join(priors)}];",
            "  return categorical({ps: priors, vs: labels});",
            "})",
        ]
    )

    pain = {"heart_attack": 0.9, "panic_attack": 0.75, reflux: 0.7, muscle: 0.65, "other": 0.3}
    dizzy = {"heart_attack": 0.7, "panic_attack": 0.8, reflux: 0.2, muscle: 0.15, "other": 0.25}
    if pneumo:
        pain[pneumo] = 0.85
        dizzy[pneumo] = 0.6

    defs.append(prior_lines)
    defs.append(_sym_line("has_chest_pain", pain))
    defs.append(_sym_line("feels_lightheaded", dizzy))
    if vid == "vignette4":
        click = {"heart_attack": 0.05, "panic_attack": 0.15, reflux: 0.05, muscle: 0.5, "other": 0.2}
        if pneumo:
            click[pneumo] = 0.9
        defs.append(_sym_line("has_clicking_noise_in_chest", click))
    defs.append(
        "var is_having_heart_attack = mem(function(patient){\n"
        "  return has_ailment(patient) == 'heart_attack'\n})"
    )

    lines = ["var model = function(){"]
    lines += defs
    lines += conditions
    lines.append("return {")
    lines.append("  query1: is_having_heart_attack('sean'),")
    lines.append("  query2: has_ailment('sean')")
    lines.append("}")
    lines.append("}")
    lines.append('var posterior = Infer({model: model, method: "rejection", samples: 5000});')
    lines.append("viz(posterior);")
    return "\n".join(lines) + "\n"


def broken_model(vid: str, slot: int, mode: str) -> str:
    good = model_source(vid, slot)
    if mode == "parse":
        return good.replace("return {", "return {{", 1)
    if mode == "validate":
        return good.replace("flip(0.9)", "flip(0.9, 0.1)", 1)
    if mode == "budget":
        return good.replace(
            "condition(has_chest_pain('sean'))",
            "condition(flip(0.0000001))\ncondition(has_chest_pain('sean'))",
            1,
        )
    if mode == "semantic":
        return good.replace("'other'", "'bad_humors'").replace('"other"', '"bad_humors"')
    if mode == "commented":
        out = []
        for line in good.splitlines():
            if line.startswith("condition("):
                out.append("// " + line)
            else:
                out.append(line)
        return "\n".join(out) + "\n"
    raise AssertionError(mode)


# ---------------------------------------------------------------------------
# The scripted backend


class ScriptedLm(LmBackend):
    backend_id = "scripted"

    def __init__(self):
        self._cursors: dict[str, int] = {}
        self.artifact_scores: dict[str, float] = {}

    def register_score(self, artifact: str, score: float) -> None:
        self.artifact_scores.setdefault(artifact, score)

    def complete_many(self, request, n):
        key = fixture_key(request.stage, request.prompt)
        start = self._cursors.get(key, 0)
        self._cursors[key] = start + n
        return [
            LmResponse(text=self._generate(request, start + i), backend_id=self.backend_id)
            for i in range(n)
        ]

    def _generate(self, request, index: int) -> str:
        stage = request.stage
        if stage is Stage.TRANSLATE:
            return self._translation(request.prompt, index)
        if stage is Stage.SKETCH:
            return self._sketch(request.prompt, index)
        if stage is Stage.SYNTHESIZE_CODE:
            return self._code(request.prompt, index)
        if stage is Stage.SCORE:
            return self._score(request.prompt)
        if stage is Stage.CANONICALIZE:
            return self._canonicalize(request.prompt)
        raise AssertionError(stage)

    def _register_translation(self, vid: str, conditions: list[str], score: float) -> str:
        block = translation_block(conditions)
        statements, queries, skipped = parse_translation_block(
            block, len(conditions)
        )
        canonical = Translation(
            condition_statements=statements,
            query_expressions=queries,
            skipped_sentences=skipped,
            lm_score=0.0,
        ).block_text()
        self.register_score(canonical, score)
        return block

    def _translation(self, prompt: str, index: int) -> str:
        vid = vignette_of(prompt)
        slot = index // N_TRANSLATIONS + 1
        j = index % N_TRANSLATIONS
        if slot in PLANS[vid]["translate"]:
            return "I am not sure how to formalize this case; the patient should see a doctor."
        if j == 0:
            return "Here is the translation.\n\n" + self._register_translation(
                vid, canonical_translation(vid), 0.9
            )
        if j == 1:
            return self._register_translation(vid, variant_translation(vid), 0.55)
        if j == 2:
            # same statements, chattier framing; parses identically so it ties
            # with j=0 and the tiebreak keeps the lowest index
            return self._register_translation(vid, canonical_translation(vid), 0.9)
        return "CONDITIONS: the patient is unwell.\nQUERIES: none."

    def _sketch(self, prompt: str, index: int) -> str:
        # only slots that survived translation reach the sketch stage, so the
        # i-th sketch batch belongs to the (i+1)-th surviving slot
        vid = vignette_of(prompt)
        slot = _survivors(vid, ("translate",))[index // N_SKETCHES]
        j = index % N_SKETCHES
        if slot in PLANS[vid]["sketch"]:
            return "The physiology here is too complicated to sketch."
        if j == 0:
            block = sketch_block(vid)
            self.register_score(block, 0.85)
            return "Thinking it through.\n\n" + block
        if j == 1:
            block = sketch_block(vid, extra=["has_family_history"], prose_suffix=" Family history may matter.")
            self.register_score(block, 0.6)
            return block
        block = sketch_block(vid, prose_suffix=" The presentation is probably benign.")
        self.register_score(block, 0.5)
        return block

    def _code(self, prompt: str, index: int) -> str:
        vid = vignette_of(prompt)
        slot = _survivors(vid, ("translate", "sketch"))[index]
        plan = PLANS[vid]
        if slot in plan["parse"]:
            source = broken_model(vid, slot, "parse")
        elif slot in plan["validate"]:
            source = broken_model(vid, slot, "validate")
        elif slot in plan["budget"]:
            source = broken_model(vid, slot, "budget")
        elif slot in plan["semantic"]:
            source = broken_model(vid, slot, "semantic")
        elif slot in plan["commented"]:
            source = broken_model(vid, slot, "commented")
        else:
            source = model_source(vid, slot)
        return f"Here is the synthesized model.\n<START_MODEL>\n{source}<END_MODEL>\n"

    def _score(self, prompt: str) -> str:
        if "bad_humors" in prompt:
            return "The ailment support includes a non-condition.\nSCORE: 0.08"
        for artifact in sorted(self.artifact_scores, key=len, reverse=True):
            if artifact in prompt:
                return f"SCORE: {self.artifact_scores[artifact]}"
        return "SCORE: 0.75"

    def _canonicalize(self, prompt: str) -> str:
        marker = "raw categories: "
        start = prompt.index(marker) + len(marker)
        end = prompt.index("]", start) + 1
        categories = json.loads(prompt[start:end])
        mapping = {c: THESAURUS.get(c, c) for c in categories}
        return json.dumps(mapping, indent=2)


# ---------------------------------------------------------------------------
# Recording


def fixture_config(portable: bool = False) -> PipelineConfig:
    return PipelineConfig(
        backend="replay",
        fixture_dir="fixtures/lm" if portable else str(FIXTURE_DIR),
        overrides_path="data/overrides.json" if portable else str(REPO / "data" / "overrides.json"),
        init_budget_seconds=90.0,
        init_budget_max_proposals=60_000,
        samples_per_model=5000,
        sampling_max_proposals=5_000_000,
        deterministic_artifacts=True,
    )


def record_run(vid: str, k: int, seed: int) -> None:
    scripted = ScriptedLm()
    recorder = RecordBackend(scripted, FIXTURE_DIR)
    vignette = Vignette.load(REPO / "data" / "vignettes" / f"{vid}.json")
    config = fixture_config()
    with tempfile.TemporaryDirectory() as tmp:
        try:
            run, _ = synthesis.run_pipeline(vignette, k, seed, config, recorder, tmp)
        except synthesis.AllCandidatesFailed as exc:
            run = exc.run
    statuses = [c.status.value for c in run.candidates]
    compiled = sum(1 for c in run.candidates if c.valid)
    print(f"{vid} k={k} seed={seed}: {compiled}/{k} valid; statuses={statuses}")


def record_acceptance_mapping() -> None:
    scripted = ScriptedLm()
    recorder = RecordBackend(scripted, FIXTURE_DIR)
    raws = {"collapsed lung", "pneumothorax", "heart_attack", "anxiety disorder", "anxiety attack"}
    overrides = canon.load_overrides(REPO / "data" / "overrides.json")
    mapping = canon.build_mapping(raws, recorder, overrides)
    targets = sorted(set(mapping.entries[r] for r in raws))
    print("acceptance mapping targets:", targets)


def emit_corpus_programs() -> None:
    clean = REPO / "data" / "programs" / "clean"
    commented = REPO / "data" / "programs" / "commented"
    clean.mkdir(parents=True, exist_ok=True)
    commented.mkdir(parents=True, exist_ok=True)
    for vid in ("vignette1", "vignette2", "vignette3", "vignette4"):
        first_good = next(
            s
            for s in range(1, 21)
            if not any(s in PLANS[vid][m] for m in ("translate", "sketch", "parse", "validate", "budget", "semantic", "commented"))
        )
        (clean / f"sean_{vid}.medppl").write_text(model_source(vid, first_good))
        (clean / f"sean_{vid}_alt.medppl").write_text(model_source(vid, first_good + 1))
    for i, (vid, slot) in enumerate(
        [("vignette1", 4), ("vignette2", 2), ("vignette2", 9), ("vignette3", 4), ("vignette4", 4)]
    ):
        (commented / f"commented_{i + 1}.medppl").write_text(broken_model(vid, slot, "commented"))


def main() -> None:
    if FIXTURE_DIR.exists():
        shutil.rmtree(FIXTURE_DIR)
    FIXTURE_DIR.mkdir(parents=True)
    for vid in ("vignette1", "vignette2", "vignette3", "vignette4"):
        record_run(vid, 20, seed=7)
    record_run("vignette2", 3, seed=7)
    record_run("vignette2", 1, seed=7)
    record_run("vignette1", 1, seed=7)
    record_acceptance_mapping()
    emit_corpus_programs()
    count = sum(1 for _ in FIXTURE_DIR.rglob("*.txt"))
    print(f"fixtures written: {count} files under {FIXTURE_DIR}")
    # paths in the shipped config are relative to the config file's directory
    config_path = REPO / "fixture_config.json"
    config_path.write_text(
        json.dumps(fixture_config(portable=True).to_json(), indent=2, sort_keys=True) + "\n"
    )
    print(f"fixture config written: {config_path}")


if __name__ == "__main__":
    main()
