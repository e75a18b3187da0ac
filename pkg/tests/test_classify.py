from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from ebforge.repair import (
    GOAL_SHAPES, PRECEDENCE, ProofStateSummary, RepairRecord, AtomicRepair, classify, recommend,
    summarize,
)
from ebforge.semantics import development_pos


def cats(s):
    return [c.id for c in classify(s)]


def test_fun3_state_is_default(seed, seed_store):
    po = next(p for p in development_pos(seed) if p.key == "M1:find_not_better/FUN_3/INV")
    s = summarize(po, seed_store.tree(po.key))
    assert cats(s) == ["default"]
    rules = recommend(classify(s), s)
    assert len(rules) == 2 and all(r.category == "default" for r in rules)
    assert "inv'" in rules[0].text


def test_wd_on_invariant(seed, seed_store):
    po = next(p for p in development_pos(seed) if p.key == "M0:FUN_1/WD")
    s = summarize(po, seed_store.tree(po.key))
    assert 5 in cats(s)
    [rule] = [r for r in recommend(classify(s), s) if r.category == 5]
    assert "strengthen the invariant" in rule.text


def test_wd_on_guard():
    s = ProofStateSummary("M:ev/grd1/WD", "WD", origin_element="M/events/ev/guards/grd1")
    [rule] = recommend(classify(s), s)
    assert "strengthen the guard" in rule.text


def test_eql_state(seed, seed_store):
    po = next(p for p in development_pos(seed) if p.key == "M1:stop_empty/j/EQL")
    assert 4 in cats(summarize(po, seed_store.tree(po.key)))


def test_uninstantiated_hint_names_the_label():
    s = ProofStateSummary("M:p", "INV", uninstantiated_universal=("ax_univ",))
    rule = recommend(classify(s), s)[0]
    assert rule.category == 7 and rule.hints["target"] == ["ax_univ"]


def test_repair_introduced_label_counts_as_uninstantiated(seed, seed_store):
    po = next(p for p in development_pos(seed) if p.key == "M1:stop_empty/j/EQL")
    tree = seed_store.tree(po.key)
    from ebforge.proof import Tactic, apply_tactic
    path, _ = tree.first_open()
    t2 = apply_tactic(tree, list(path), Tactic("cut", ("!x. x : dom(f) => f(x) >= 0",)))
    rec = RepairRecord(1, po.key, AtomicRepair("addLemma", {"lemma": "..."}), "noProgress",
                       introduced_label="cut")
    s = summarize(po, t2, [rec])
    assert cats(s)[0] == 7


def test_recommend_needs_categories():
    with pytest.raises(ValueError):
        recommend([], ProofStateSummary("p", "INV"))


def test_unknown_shape_rejected():
    with pytest.raises(ValueError):
        ProofStateSummary("p", "INV", goal_shape="weird")


@given(st.sampled_from(GOAL_SHAPES), st.sampled_from(["WD", "INV", "EQL", "FIS", "GRD", "SIM"]),
       st.booleans(), st.sampled_from([None, "forall", "exists"]))
def test_categories_follow_precedence(shape, kind, unin, quant):
    s = ProofStateSummary("p", kind, goal_shape=shape,
                          uninstantiated_universal=("h",) if unin else (), quantified_invariant=quant)
    got = cats(s)
    if got != ["default"]:
        assert got == [c for c in PRECEDENCE if c in got]
    assert (7 in got) == unin
    assert recommend(classify(s), s)
