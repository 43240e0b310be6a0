"""MedPPL: the probabilistic language the synthesis pipeline targets.

Public surface: parse/render/validate, run_once, rejection_sample,
enumerate_program, apply_edit, plus the value/error types they exchange.
"""

from .errors import (
    ContinuousUnsupported,
    Diagnostic,
    EditProducesInvalidProgram,
    EditTargetMissing,
    MedPplError,
    MedRuntimeError,
    MedSyntaxError,
    PathExplosion,
    UnknownIdentifier,
    UnsupportedConstruct,
)
from .edits import EDIT_KINDS, Edit, apply_edit
from .exact import DEFAULT_PATH_CAP, ExactDistribution, enumerate_program
from .interp import Outcome, Status, run_once
from .sample import Budget, SampleSet, rejection_sample
from .syntax import Program, parse, render
from .validate import uses_gaussian, validate
from .values import render_value, values_equal

__all__ = [
    "Budget",
    "ContinuousUnsupported",
    "DEFAULT_PATH_CAP",
    "Diagnostic",
    "EDIT_KINDS",
    "Edit",
    "EditProducesInvalidProgram",
    "EditTargetMissing",
    "ExactDistribution",
    "MedPplError",
    "MedRuntimeError",
    "MedSyntaxError",
    "Outcome",
    "PathExplosion",
    "Program",
    "SampleSet",
    "Status",
    "UnknownIdentifier",
    "UnsupportedConstruct",
    "apply_edit",
    "enumerate_program",
    "parse",
    "rejection_sample",
    "render",
    "render_value",
    "run_once",
    "uses_gaussian",
    "validate",
    "values_equal",
]
