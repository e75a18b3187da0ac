from __future__ import annotations

import itertools
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from ebforge.ast import Event, LabeledPred, Machine, Development
from ebforge.frontend import parse_expr, parse_pred
from ebforge.mc import UNDEF, Bounds, evaluate, explore, replay_trace, satisfiable, solve_constants


def F(*vals):
    return frozenset(enumerate(vals))


def test_min_of_range():
    assert evaluate(parse_expr("min(ran(f))"), {"f": F(3, 1)}) == 1


def test_application_outside_domain_is_undefined():
    assert evaluate(parse_expr("f(j)"), {"f": F(3), "j": 1}) is UNDEF


def test_image_min():
    p = parse_pred("f(j) = min(f[0..(i - 1)])")
    assert evaluate(p, {"f": F(3, 1), "i": 2, "j": 1}) is True
    # brute-force oracle over all small f, i, j
    for vals in itertools.product(range(3), repeat=3):
        f = F(*vals)
        for i in range(1, 4):
            for j in range(3):
                want = vals[j] == min(vals[:i])
                assert evaluate(p, {"f": f, "i": i, "j": j}) is want


def test_constants_within_bounds(minsearch):
    vals = solve_constants(list(minsearch.contexts), Bounds(0, 2, 3, 5, 100))
    ones = sorted(v["f"] for v in vals if v["n"] == 1)
    assert ones == [F(0), F(1), F(2)]
    # exhaustive oracle: n in 0..2 and f : 0..n-1 --> 0..2
    assert len(vals) == sum(3 ** n for n in range(3))


def test_contradictory_axioms_have_no_valuation(minsearch):
    c = minsearch.contexts[0]
    c2 = replace(c, axioms=c.axioms + (LabeledPred("bad", parse_pred("n > 0 & n < 0")),))
    assert solve_constants([c2], Bounds()) == []


def test_no_constants_single_valuation():
    from ebforge.ast import Context
    assert solve_constants([Context("C")], Bounds()) == [{}]


def test_cursor_style_initialisation_violates_fun1(broken):
    res = explore("M_broken", broken, constants=[{"n": 2, "f": F(3, 1)}])
    assert res.verdict == "invariantViolation"
    assert res.violated == ("FUN_1",) and res.requirements == ("FUN-1",)
    assert len(res.trace.steps) == 1
    assert replay_trace(res.trace, "M_broken", broken)


def test_but_not_when_f0_is_the_minimum(broken):
    res = explore("M_broken", broken, constants=[{"n": 2, "f": F(1, 3)}])
    assert res.ok


def _simulate(n, f):
    init = (0, False, 1, True)
    seen, todo = {init}, [init]
    while todo:
        j, h, i, s = todo.pop()
        nxt = []
        if s and n > 0 and i != n and 1 <= i and f[i] < f[j]:
            nxt.append((i, h, i + 1, s))
        if s and n > 0 and i != n and 1 <= i and f[i] >= f[j]:
            nxt.append((j, h, i + 1, s))
        if s and i == n and n > 0:
            nxt.append((j, True, i, False))
        if s and n == 0:
            nxt.append((0, True, i, False))
        for x in nxt:
            if x not in seen:
                seen.add(x)
                todo.append(x)
    return seen


def test_concrete_machine_exhaustive(minsearch):
    res = explore("M1", minsearch, Bounds(0, 3, 3, 20, 20000))
    assert res.verdict == "ok"
    total = sum(len(_simulate(n, f)) for n in range(4) for f in itertools.product(range(4), repeat=n))
    assert (res.states, res.valuations) == (total, 85)


def _tiny(guard="bfalse"):
    init = Event("INITIALISATION", actions=())
    from ebforge.frontend.formula import parse_action
    from ebforge.ast import Action
    k, v, e = parse_action("x := 0")
    init = Event("INITIALISATION", actions=(Action("a1", k, v, expr=e),))
    ev = Event("step", guards=(LabeledPred("g1", parse_pred(guard)),),
               actions=(Action("a1", *parse_action("x := x + 1")[:2], expr=parse_expr("x + 1")),))
    m = Machine("T", variables=("x",), invariants=(LabeledPred("i1", parse_pred("x : INT")),),
                events=(init, ev))
    return Development((), (m,))


def test_deadlock_trace():
    res = explore("T", _tiny(), check_deadlock=True)
    assert res.verdict == "deadlock" and len(res.trace.steps) == 1


def test_depth_bound_is_ok_but_state_cap_is_exhaustion():
    d = _tiny("x < 100")
    res = explore("T", d, Bounds(depth=5))
    assert res.verdict == "ok" and res.states == 6
    res = explore("T", d, Bounds(max_states=3))
    assert res.verdict == "boundExhausted" and res.ok


def test_satisfiable(minsearch):
    assert satisfiable(minsearch, "M1")
    m = minsearch.machine("M1")
    bad = minsearch.replace_machine(replace(m, invariants=m.invariants + (
        LabeledPred("z", parse_pred("n = 0 & n > 0")),)))
    assert not satisfiable(bad, "M1")


@given(st.lists(st.integers(-3, 3), min_size=0, max_size=4), st.integers(-1, 4))
def test_undefinedness_matches_domain(vals, j):
    got = evaluate(parse_expr("f(j)"), {"f": F(*vals), "j": j})
    assert got == (vals[j] if 0 <= j < len(vals) else UNDEF)
