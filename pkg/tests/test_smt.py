from __future__ import annotations

import os
import random
import shutil

import pytest

from ebforge.ast import INT_T, pow_t
from ebforge.frontend import parse_pred
from ebforge.proof import UnexportableOperator, export_smtlib, run_solver
from ebforge.proof.tree import make
from ebforge.semantics import development_pos

from tests_support import ground_sequent, valid_by_evaluation

Z3 = shutil.which("z3") or next((p for p in ["/usr/local/bin/z3"] if os.path.exists(p)), None)
needs_z3 = pytest.mark.skipif(Z3 is None, reason="z3 not installed")


def test_script_shape():
    s = make([], parse_pred("!x. x > 0 => x >= 1"), {})
    text = export_smtlib(s)
    assert "(assert (not" in text and text.rstrip().endswith("(check-sat)")


@needs_z3
def test_universal_goal_is_unsat():
    s = make([], parse_pred("!x. x > 0 => x >= 1"), {})
    assert run_solver(export_smtlib(s), Z3) == "unsat"


def test_card_of_symbolic_set_is_unexportable():
    s = make([], parse_pred("card(S) > 0"), {"S": pow_t(INT_T)})
    with pytest.raises(UnexportableOperator):
        export_smtlib(s)


@needs_z3
def test_ground_sequents_agree_with_evaluation():
    r = random.Random(23)
    checked = 0
    while checked < 60:
        s = ground_sequent(r)
        want = valid_by_evaluation(s)
        if want is None:
            continue
        try:
            script = export_smtlib(s)
        except UnexportableOperator:
            continue
        got = run_solver(script, Z3)
        assert got in ("sat", "unsat"), s.text()
        assert (got == "unsat") == want, s.text()
        checked += 1


@needs_z3
def test_open_seed_obligations_are_refutable(seed, seed_store):
    # second route: every PO the prover leaves open on the seed is genuinely invalid
    pos = {p.key: p for p in development_pos(seed)}
    for key in seed_store.open():
        assert run_solver(export_smtlib(pos[key].sequent), Z3, timeout=10) == "sat", key
