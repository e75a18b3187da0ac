from __future__ import annotations

from ebforge.frontend.check import infer_types, well_formed
from ebforge.frontend.diagnostics import CODES, Diagnostic, DiagnosticError, SchemaViolation
from ebforge.frontend.formula import ParseError, parse_expr, parse_pred, render
from ebforge.frontend.jsonfmt import parse_json, serialize_json
from ebforge.frontend.text import parse_text, serialize_text


def serialize(d, fmt: str = "json") -> bytes:
    if fmt == "json":
        return serialize_json(d)
    if fmt == "text":
        return serialize_text(d).encode()
    raise ValueError(f"unknown format {fmt}")


def load(path) -> "Development":
    """Read a development by file extension (.eb text, anything else JSON)."""
    from pathlib import Path

    p = Path(path)
    data = p.read_bytes()
    if p.suffix == ".eb":
        return parse_text(data.decode())
    return parse_json(data)


__all__ = [
    "CODES", "Diagnostic", "DiagnosticError", "ParseError", "SchemaViolation", "infer_types",
    "load", "parse_expr", "parse_json", "parse_pred", "parse_text", "render", "serialize",
    "serialize_json", "serialize_text", "well_formed",
]
