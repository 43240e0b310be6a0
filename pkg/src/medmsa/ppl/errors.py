"""Exception types for the MedPPL language toolchain."""

from __future__ import annotations

from dataclasses import dataclass


class MedPplError(Exception):
    """Base class for every MedPPL toolchain error."""


class MedSyntaxError(MedPplError):
    """Source text does not lex/parse. Carries position and an expected-token hint."""

    def __init__(self, message: str, line: int, col: int, expected: str | None = None):
        self.line = line
        self.col = col
        self.expected = expected
        hint = f" (expected {expected})" if expected else ""
        super().__init__(f"{line}:{col}: {message}{hint}")


class UnknownIdentifier(MedPplError):
    def __init__(self, name: str, line: int, col: int):
        self.name = name
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: unknown identifier '{name}'")


class UnsupportedConstruct(MedPplError):
    """Syntax outside the MedPPL subset; names the offending construct."""

    def __init__(self, construct: str, line: int, col: int):
        self.construct = construct
        self.line = line
        self.col = col
        super().__init__(f"{line}:{col}: unsupported construct: {construct}")


class MedRuntimeError(MedPplError):
    """A synthesized model misbehaved at execution time (bad primitive args,
    non-boolean condition, falling off a function without return, ...).
    Distinct from a rejection, which is normal control flow."""


class ContinuousUnsupported(MedPplError):
    """Exact enumeration requested for a program containing gaussian."""


class PathExplosion(MedPplError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"enumeration exceeded the path cap of {cap}")


class EditTargetMissing(MedPplError):
    """An edit referenced a condition index or source span that does not exist."""


class EditProducesInvalidProgram(MedPplError):
    """An edit applied cleanly as text but the result fails parse/validate."""

    def __init__(self, message: str, diagnostics: list | None = None):
        self.diagnostics = diagnostics or []
        super().__init__(message)


@dataclass(frozen=True)
class Diagnostic:
    """One static-check finding from validate(); never raised."""

    code: str
    message: str
    line: int = 0
    col: int = 0

    def to_json(self) -> dict:
        return {"code": self.code, "message": self.message, "line": self.line, "col": self.col}

    @staticmethod
    def from_json(d: dict) -> "Diagnostic":
        return Diagnostic(d["code"], d["message"], d.get("line", 0), d.get("col", 0))
