from __future__ import annotations

import random

import pytest
from hypothesis import given, strategies as st

from ebforge.ast import INT_T, pow_t
from ebforge.frontend import parse_pred
from ebforge.proof import (
    CLOSING, Budget, InapplicableTactic, ProofNode, Tactic, auto_prove, expand,
)
from ebforge.proof.tree import make
from ebforge.semantics import development_pos

from tests_support import ground_sequent, linear_sequent, valid_by_enumeration, valid_by_evaluation


def seq(hyps, goal, types=None):
    return make([(f"h{k}", parse_pred(h)) for k, h in enumerate(hyps)], parse_pred(goal), types or {})


INTS = {v: INT_T for v in ("i", "j", "n", "x", "m")}


def test_ground_eval_closes_trivial_equality():
    assert expand(seq([], "1 = 1"), Tactic("groundEval")) == []
    assert auto_prove(seq([], "1 = 1")).closed


def test_linarith_example():
    s = seq(["i >= 1", "i <= n", "n = 1"], "i = 1", INTS)
    assert expand(s, Tactic("linArith")) == []


def test_pre_repair_fun3_state_stays_open():
    s = seq(["i = 0"], "j = 0", INTS)
    assert not auto_prove(s).closed


def test_hypclose_needs_the_goal():
    with pytest.raises(InapplicableTactic):
        expand(seq(["x > 0"], "x > 1", INTS), Tactic("hypClose"))


def test_instantiate_adds_the_instance():
    from ebforge.ast import pair_t
    types = {"f": pow_t(pair_t(INT_T, INT_T)), "m": INT_T, "j": INT_T}
    s = seq(["!x. x : dom(f) => f(x) >= m"], "f(j) >= m", types)
    [child] = expand(s, Tactic("instantiate", ("h0", "j")))
    assert parse_pred("j : dom(f) => f(j) >= m") in child.hyps


def test_cut_spawns_lemma_and_use_branches():
    s = seq(["n = 0"], "j = 0", INTS)
    kids = expand(s, Tactic("cut", ("n = 0 => j = 0",)))
    assert len(kids) == 2
    assert kids[0].goal == parse_pred("n = 0 => j = 0")
    assert parse_pred("n = 0 => j = 0") in kids[1].hyps


def test_unknown_tactic():
    with pytest.raises((InapplicableTactic, ValueError)):
        expand(seq([], "1 = 1"), Tactic("magic"))


def test_tree_json_is_stable(minsearch):
    po = development_pos(minsearch)[3]
    a, b = auto_prove(po.sequent), auto_prove(po.sequent)
    assert a.to_json() == b.to_json()
    assert a.closed and a.status == "closed"
    t = Tactic("cut", ("n = 0",))
    assert Tactic.from_json(t.to_json()) == t


def test_corpus_is_fully_discharged(minsearch):
    from ebforge.proof import prove_all
    st_ = prove_all(development_pos(minsearch))
    assert st_.open() == []


def test_seed_open_set(seed_store):
    assert seed_store.open() == [
        "M0:FUN_1/WD", "M0:stop_empty/FUN_1/INV", "M1:find_not_better/FUN_3/INV",
        "M1:find_not_better/inv3/INV", "M1:stop_empty/j/EQL"]


def test_closed_leaves_use_closing_tactics(seed_store):
    for k in seed_store.keys():
        for t in seed_store.tree(k).root.tactics_used():
            assert t.name in CLOSING or t.name in {"andSplit", "impIntro", "notIntro", "allIntro",
                                                   "iffSplit", "witness", "instantiate", "orElim",
                                                   "caseSplit", "simp", "cut", "eqRewrite",
                                                   "unfoldDef"}


def test_ground_soundness_sample():
    r = random.Random(11)
    for _ in range(400):
        s = ground_sequent(r)
        if auto_prove(s, Budget(nodes=300)).closed:
            assert valid_by_evaluation(s) is not False, s.text()


def test_linarith_matches_enumeration_sample():
    r = random.Random(5)
    for _ in range(150):
        s = linear_sequent(r)
        try:
            got = expand(s, Tactic("linArith")) == []
        except InapplicableTactic:
            got = False
        assert got == valid_by_enumeration(s), s.text()


@given(st.integers(-6, 6), st.integers(-6, 6), st.integers(-6, 6))
def test_linarith_interval(a, b, c):
    s = seq([f"{a} <= x", f"x <= {b}"], f"x <= {c}", INTS)
    try:
        got = expand(s, Tactic("linArith")) == []
    except InapplicableTactic:
        got = False
    assert got == (a > b or b <= c)
