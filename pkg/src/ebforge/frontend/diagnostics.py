from __future__ import annotations

from dataclasses import dataclass, field

# Closed set of diagnostic codes.
CODES = frozenset({
    "SCHEMA_VIOLATION",
    "SYNTAX_ERROR",
    "BAD_IDENT",
    "UNDECLARED_IDENT",
    "SCOPE_VIOLATION",
    "TYPE_MISMATCH",
    "TYPE_UNRESOLVED",
    "DUPLICATE_LABEL",
    "DUPLICATE_IDENT",
    "UNKNOWN_LINK",
    "CYCLIC_LINK",
    "LINK_ORDER",
    "MISSING_INIT",
    "INIT_MALFORMED",
    "NOT_ASSIGNABLE",
    "CONFLICTING_ASSIGNMENT",
    "UNKNOWN_ABSTRACT_EVENT",
    "DROPPED_PARAMETER",
    "MULTIPLE_VARIANTS",
    "UNKNOWN_REQUIREMENT",
})


@dataclass(frozen=True, order=True)
class Diagnostic:
    location: str
    code: str
    message: str
    severity: str = "error"
    hint: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if self.code not in CODES:
            raise ValueError(f"unknown diagnostic code {self.code}")

    def to_json(self) -> dict:
        out = {"severity": self.severity, "code": self.code, "location": self.location,
               "message": self.message}
        if self.hint:
            out["hint"] = self.hint
        return out

    def __str__(self):
        return f"{self.severity}: {self.location}: {self.code}: {self.message}"


class DiagnosticError(ValueError):
    """Raised when a document cannot be turned into a well-formed development."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = sorted(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics[:5]))


class SchemaViolation(DiagnosticError):
    pass


def errors(diags: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diags if d.severity == "error"]
