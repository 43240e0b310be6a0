"""Independent oracles for expected values used in tests.

Everything here is computed with explicit loops and closed-form math over
constants transcribed from the corpus programs; nothing imports the
interpreter, enumerator or compiler it is used to check.
"""

from __future__ import annotations

import math


def phi(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


def _normalize(weights: dict) -> dict:
    total = sum(weights.values())
    return {k: v / total for k, v in weights.items()}


# ---------------------------------------------------------------------------
# Marie exemplar (gaussian fatigue): discrete skeleton x analytic normal tail.
# Constants mirror data/programs/marie.medppl.

_MARIE_DYS = {
    "stomach_flu": 0.2,
    "parasite": 0.9,
    "cholera": 0.95,
    "ulcerative_colitis": 0.85,
    "other": 0.1,
}


def _marie_priors(travel: bool) -> dict:
    parasite = 0.05 if travel else 0.000001
    cholera = 0.0001 if travel else 0.000001
    return _normalize(
        {
            "stomach_flu": 0.1,
            "parasite": parasite,
            "cholera": cholera,
            "ulcerative_colitis": 0.0001,
            "other": 0.1,
        }
    )


def _marie_fatigue_tail(ailment: str) -> float:
    # P(fatigue_level > 30) with fatigue_level ~ N(mu, sigma) per branch
    if ailment == "cholera":
        return 1.0 - phi((30 - 30) / 3)
    if ailment in ("stomach_flu", "parasite", "ulcerative_colitis"):
        return 1.0 - phi((30 - 25) / 5)
    return 1.0 - phi((30 - 20) / 5)


def marie_hybrid() -> dict:
    """Posterior and evidence for the Marie exemplar, conditioning on
    dysentery AND extreme fatigue AND recent travel."""
    p_travel = 0.2
    joint: dict[str, float] = {}
    evidence = 0.0
    for ailment, prior in _marie_priors(True).items():
        weight = p_travel * prior * _MARIE_DYS[ailment] * _marie_fatigue_tail(ailment)
        joint[ailment] = weight
        evidence += weight
    posterior = {a: w / evidence for a, w in joint.items()}
    return {
        "evidence": evidence,
        "query1_true": posterior["ulcerative_colitis"],
        "query2": posterior,
    }


# ---------------------------------------------------------------------------
# Discretized Marie variant. Constants mirror
# data/programs/clean/marie_discrete.medppl.


def _marie_discrete_fatigue(ailment: str) -> float:
    if ailment == "cholera":
        return 0.6
    if ailment in ("stomach_flu", "parasite", "ulcerative_colitis"):
        return 0.4
    return 0.1


def marie_discrete() -> dict:
    p_travel = 0.5
    joint: dict[str, float] = {}
    evidence = 0.0
    for ailment, prior in _marie_priors(True).items():
        weight = p_travel * prior * _MARIE_DYS[ailment] * _marie_discrete_fatigue(ailment)
        joint[ailment] = weight
        evidence += weight
    posterior = {a: w / evidence for a, w in joint.items()}
    return {
        "evidence": evidence,
        "query1_true": posterior["ulcerative_colitis"],
        "query2": posterior,
    }


# ---------------------------------------------------------------------------
# The vignette-2 fixture model (slot 1). Constants mirror
# data/programs/clean/sean_vignette2.medppl: reflux label 'heartburn',
# muscle label 'muscle_strain', jitter 0.01.

_V2_LABELS = ("heart_attack", "panic_attack", "heartburn", "muscle_strain", "other")
_V2_FIXED_PRIORS = {"panic_attack": 0.15, "heartburn": 0.18, "muscle_strain": 0.16, "other": 0.1}
_V2_PAIN = {
    "heart_attack": 0.9,
    "panic_attack": 0.75,
    "heartburn": 0.7,
    "muscle_strain": 0.65,
    "other": 0.3,
}
_V2_DIZZY = {
    "heart_attack": 0.7,
    "panic_attack": 0.8,
    "heartburn": 0.2,
    "muscle_strain": 0.15,
    "other": 0.25,
}


def _v2_priors(over_60: bool, exercises: bool) -> dict:
    base_risk = 0.31 if over_60 else 0.06
    heart = base_risk * 0.4 if exercises else base_risk
    weights = dict(_V2_FIXED_PRIORS)
    weights["heart_attack"] = heart
    return _normalize(weights)


def sean_v2(condition_exercises: bool) -> dict:
    """Posterior over ailments for the vignette-2 fixture model, conditioning
    on chest pain, lightheadedness, being over 60, and the given exercise
    observation."""
    joint: dict[str, float] = {label: 0.0 for label in _V2_LABELS}
    evidence = 0.0
    for over_60 in (True, False):
        p_o = 0.5
        for exercises in (True, False):
            p_e = 0.5
            if over_60 is not True or exercises is not condition_exercises:
                continue
            for ailment, prior in _v2_priors(over_60, exercises).items():
                weight = p_o * p_e * prior * _V2_PAIN[ailment] * _V2_DIZZY[ailment]
                joint[ailment] += weight
                evidence += weight
    posterior = {a: w / evidence for a, w in joint.items()}
    return {
        "evidence": evidence,
        "heart_attack": posterior["heart_attack"],
        "query2": posterior,
    }


def total_variation(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
