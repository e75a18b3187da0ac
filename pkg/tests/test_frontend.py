from __future__ import annotations

import json

import pytest
from hypothesis import given, strategies as st

from ebforge.ast import Development, Event, Machine
from ebforge.frontend import (
    DiagnosticError, SchemaViolation, parse_json, parse_pred, parse_text, render, serialize,
    serialize_json, serialize_text, well_formed,
)
from ebforge.frontend.diagnostics import errors
from ebforge.frontend.formula import ParseError

MODELS = ["minsearch", "minsearch_seed", "broken_init"]


@pytest.mark.parametrize("name", MODELS)
def test_text_and_json_twins_agree(corpus, name):
    a = parse_text((corpus / f"{name}.eb").read_text())
    b = parse_json((corpus / f"{name}.ebj").read_bytes())
    assert a == b


@pytest.mark.parametrize("name", MODELS)
@pytest.mark.parametrize("fmt", ["json", "text"])
def test_round_trip(corpus, name, fmt):
    d = parse_text((corpus / f"{name}.eb").read_text())
    out = serialize(d, fmt)
    back = parse_json(out) if fmt == "json" else parse_text(out.decode())
    assert back == d
    assert serialize(back, fmt) == out


def test_corpus_shape(minsearch):
    assert len(minsearch.contexts) == 1 and len(minsearch.machines) == 2
    assert [e.name for e in minsearch.machine("M1").events] == [
        "INITIALISATION", "find_better", "find_not_better", "stop", "stop_empty"]


def test_machine_without_events_is_a_schema_violation(corpus):
    doc = json.loads((corpus / "minsearch.ebj").read_text())
    doc["machines"][0]["events"] = []
    with pytest.raises(SchemaViolation):
        parse_json(doc)


def test_minimal_model():
    doc = {"schemaVersion": 1, "contexts": [], "machines": [{
        "name": "M", "refines": None, "sees": None, "variables": [], "invariants": [],
        "variants": [], "theorems": [],
        "events": [{"name": "INITIALISATION", "refines": None, "parameters": [], "guards": [],
                    "actions": [], "requirements": []}]}]}
    d = parse_json(doc)
    assert d.machines[0].name == "M"


def test_text_syntax_error_has_position():
    with pytest.raises(DiagnosticError) as ei:
        parse_text("machine M events INIT end")
    d = ei.value.diagnostics[0]
    assert d.code in ("SYNTAX_ERROR", "SCHEMA_VIOLATION")
    assert "line" in d.hint or ":" in d.location


def _edit_inv(d: Development, label: str, src: str) -> Development:
    from dataclasses import replace
    m = d.machines[0]
    inv = tuple(replace(i, pred=parse_pred(src)) if i.label == label else i for i in m.invariants)
    return d.replace_machine(replace(m, invariants=inv))


def test_undeclared_identifier(minsearch):
    d = _edit_inv(minsearch, "inv2", "k : BOOL")
    diags = errors(well_formed(d))
    assert [(x.code, x.location) for x in diags] == [("UNDECLARED_IDENT", "M0/invariants/inv2")]


def test_inequality_guard_is_clean(minsearch):
    assert well_formed(minsearch) == []


def test_bool_int_mismatch(minsearch):
    from dataclasses import replace
    from ebforge.ast import LabeledPred
    c = minsearch.contexts[0]
    c2 = replace(c, axioms=c.axioms + (LabeledPred("axm3", parse_pred("n = TRUE")),))
    codes = [x.code for x in errors(well_formed(minsearch.replace_context(c2)))]
    assert codes == ["TYPE_MISMATCH"]


def test_serialization_is_deterministic(minsearch):
    assert serialize_json(minsearch) == serialize_json(parse_json(serialize_json(minsearch)))
    assert serialize_text(minsearch) == serialize_text(parse_text(serialize_text(minsearch)))


@pytest.mark.parametrize("src", ["x +", "(a = 1", "a := 1", "f(", "!x. "])
def test_formula_syntax_errors(src):
    with pytest.raises(ParseError):
        parse_pred(src)


# property: rendering is a right inverse of parsing on generated formulas
atoms = st.sampled_from(["x", "y", "n", "1", "0", "-2", "f(x)", "card(S)", "min(S)"])
rels = st.sampled_from(["=", "/=", "<", "<=", ">", ">="])
preds = st.recursive(
    st.tuples(atoms, rels, atoms).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
    lambda kids: st.one_of(
        st.tuples(kids, st.sampled_from(["&", "or", "=>", "<=>"]), kids).map(
            lambda t: f"({t[0]}) {t[1]} ({t[2]})"),
        kids.map(lambda k: f"not({k})"),
        kids.map(lambda k: f"!z. z : S => ({k})"),
    ),
    max_leaves=5)


@given(preds)
def test_render_parse_round_trip(src):
    p = parse_pred(src)
    assert parse_pred(render(p)) == p
