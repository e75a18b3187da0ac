from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ebforge.ast import (
    Action, ConflictingAssignment, Event, before_after, conj, conjuncts, free_vars, num, substitute, var,
)
from ebforge.frontend.formula import parse_expr, parse_pred, render


def P(s):
    return parse_pred(s)


@pytest.mark.parametrize("src, names", [
    ("searching = TRUE & i = 1 => j = 0", {"searching", "i", "j"}),
    ("!x. x : S => x >= 0", {"S"}),
    ("f(j) = min(ran(f))", {"f", "j"}),
])
def test_free_vars(src, names):
    assert free_vars(P(src)) == names


def test_substitute_free_occurrence():
    assert substitute(P("j = 0"), {"j": var("j'")}) == P("j' = 0")


def test_substitute_leaves_bound_occurrence():
    p = P("!j. j : S")
    assert substitute(p, {"j": num(5)}) == p


def test_substitute_inside_application():
    assert substitute(P("f(j) = min(ran(f))"), {"j": var("i")}) == P("f(i) = min(ran(f))")


def test_substitute_avoids_capture():
    p = P("#x. x > y")
    out = substitute(p, {"y": var("x")})
    # the bound variable is renamed so the substituted x stays free
    assert "x" in free_vars(out)
    assert out.value != ("x",)


def _act(label, src):
    from ebforge.frontend.formula import parse_action
    k, names, body = parse_action(src)
    return Action(label, k, names, **({"pred": body} if k == "becomesSuch" else {"expr": body}))


def test_before_after_frames_untouched_variables():
    e = Event("ev", actions=(_act("a1", "j := i"),))
    assert set(conjuncts(before_after(e, ["i", "j"]))) == {P("j' = i"), P("i' = i")}


def test_before_after_initialisation():
    e = Event("INITIALISATION", actions=(_act("a1", "i := 1"), _act("a2", "j := 0"),
                                         _act("a3", "searching := TRUE")))
    got = before_after(e, ["i", "j", "searching"])
    assert set(conjuncts(got)) == set(conjuncts(P("i' = 1 & j' = 0 & searching' = TRUE")))


def test_conflicting_assignment():
    e = Event("ev", actions=(_act("a1", "j := 0"), _act("a2", "j := 1")))
    with pytest.raises(ConflictingAssignment):
        before_after(e, ["j"])


def test_unicode_identifier_rejected():
    from ebforge.ast import LabeledPred, Machine
    with pytest.raises(ValueError):
        Machine("M", variables=("jé",))
    with pytest.raises(ValueError):
        LabeledPred("inv\u00e9", P("1 = 1"))


names = st.sampled_from(["a", "b", "c", "x"])
exprs = st.recursive(
    st.one_of(names.map(var), st.integers(-3, 3).map(num)),
    lambda kids: st.tuples(st.sampled_from(["+", "-", "*"]), kids, kids).map(
        lambda t: parse_expr(f"({render(t[1])}) {t[0]} ({render(t[2])})")),
    max_leaves=6)


@given(exprs, names, exprs)
def test_substitution_removes_the_variable(e, x, t):
    out = substitute(e, {x: t})
    if x not in free_vars(t):
        assert x not in free_vars(out)
    assert free_vars(out) <= (free_vars(e) - {x}) | free_vars(t)


@given(st.lists(exprs, min_size=1, max_size=4))
def test_conj_flattens(es):
    preds = [parse_pred(f"{render(e)} > 0") for e in es]
    assert conjuncts(conj(preds)) == [p for p in preds if p.op != "truth"] or len(set(preds)) < len(preds)
