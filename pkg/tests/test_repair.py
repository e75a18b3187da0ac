from __future__ import annotations

import json

import pytest

from ebforge.frontend.jsonfmt import serialize_json
from ebforge.proof import ProofStore, ProofTree, prove_all
from ebforge.proof.tree import ProofNode
from ebforge.repair import (
    AtomicRepair, InvalidRepair, InvalidTarget, RepairContext, RepairRecord, RepairSession,
    apply_repair, guard_acceptance, read_log, validate,
)
from ebforge.semantics import development_pos

FUN1 = AtomicRepair("strengthenInvariant", {
    "label": "FUN_1", "content": "has_j = TRUE & j : dom(f) => f(j) = min(ran(f))"})
INV6 = AtomicRepair("addInvariant", {"label": "inv6", "content": "n = 0 => j = 0"})
GRD7 = AtomicRepair("strengthenGuard", {"event": "find_not_better", "guard_label": "grd7",
                                        "guard_content": "1 <= i"})


def test_wd_repair_of_fun1(seed, seed_store):
    _, _, rec, verdict = apply_repair(seed, seed_store, FUN1, "M0:FUN_1/WD")
    assert verdict == "accepted"
    assert rec.delta == {"M0:FUN_1/WD": ["open", "discharged"],
                         "M0:stop_empty/FUN_1/INV": ["open", "discharged"]}


def test_new_invariant_discharges_stop_empty_refinement(seed, seed_store):
    _, store, rec, verdict = apply_repair(seed, seed_store, INV6, "M1:stop_empty/j/EQL")
    assert verdict == "accepted"
    assert rec.delta == {"M1:INITIALISATION/inv6/INV": [None, "discharged"],
                         "M1:find_better/inv6/INV": [None, "discharged"],
                         "M1:stop_empty/inv6/INV": [None, "discharged"],
                         "M1:stop_empty/j/EQL": ["open", "discharged"]}


def test_guard_repair_of_find_not_better(seed, seed_store):
    d, _, rec, verdict = apply_repair(seed, seed_store, GRD7, "M1:find_not_better/FUN_3/INV")
    assert verdict == "accepted"
    assert rec.delta == {"M1:find_not_better/FUN_3/INV": ["open", "discharged"],
                         "M1:find_not_better/inv3/INV": ["open", "discharged"]}
    assert [g.label for g in d.machine("M1").event("find_not_better").guards][-1] == "grd7"


@pytest.mark.parametrize("r", [
    AtomicRepair("deleteEverything", {}),
    AtomicRepair("addInvariant", {"label": "x"}),
    AtomicRepair("addInvariant", {"label": "x", "content": "1 = 1", "colour": "red"}),
    AtomicRepair("instantiateHypothesis", {"hyp_label": "h", "terms": "j"}),
])
def test_invalid_parameters(r):
    with pytest.raises(InvalidRepair):
        validate(r)


def test_unknown_event_is_invalid_target(seed, seed_store):
    r = AtomicRepair("addGuard", {"event": "nope", "guard_label": "g9", "guard_content": "1 = 1"})
    with pytest.raises(InvalidTarget):
        apply_repair(seed, seed_store, r, "M1:find_not_better/FUN_3/INV")


@pytest.mark.parametrize("content", ["i <=", "k > 0"])
def test_bad_content_is_rejected_at_compile_time(seed, seed_store, content):
    r = AtomicRepair("strengthenGuard", {"event": "find_not_better", "guard_label": "grd7",
                                         "guard_content": content})
    d, store, rec, verdict = apply_repair(seed, seed_store, r, "M1:find_not_better/FUN_3/INV")
    assert verdict == "rejectedCompile" and d is seed and store is seed_store
    assert rec.note


def test_contradictory_invariant_is_rejected_by_the_model_checker(minsearch):
    store = prove_all(development_pos(minsearch))
    r = AtomicRepair("addInvariant", {"machine": "M1", "label": "bad", "content": "n = 0 & n > 0"})
    _, _, rec, verdict = apply_repair(minsearch, store, r, "M1:stop_empty/j/EQL")
    assert verdict == "rejectedMC" and "contradictory" in rec.note


def test_edit_introducing_a_violation_is_rejected(minsearch):
    store = prove_all(development_pos(minsearch))
    r = AtomicRepair("addInvariant", {"machine": "M1", "label": "bad", "content": "i <= 1"})
    _, _, rec, verdict = apply_repair(minsearch, store, r, None, RepairContext())
    assert verdict == "rejectedMC" and "invariantViolation" in rec.note


def test_model_checker_is_informational(broken):
    store = prove_all(development_pos(broken))
    r = AtomicRepair("runModelChecker", {})
    d, st, rec, verdict = apply_repair(broken, store, r, "M_broken:INITIALISATION/FUN_1/INV")
    assert d is broken and st is store and verdict == "noProgress"
    assert "invariantViolation" in rec.observation and "FUN_1" in rec.observation


def test_lemma_repair_on_a_proof(seed, seed_store):
    r = AtomicRepair("addLemma", {"lemma": "n = 0 => j = 0"})
    d, store, rec, verdict = apply_repair(seed, seed_store, r, "M1:stop_empty/j/EQL")
    assert d is seed
    # the lemma itself is unprovable here, so the target stays open
    assert verdict == "noProgress"
    assert store.tree("M1:stop_empty/j/EQL").root.size() > seed_store.tree("M1:stop_empty/j/EQL").root.size()


def _store(statuses):
    s = ProofStore()
    for k, v in statuses.items():
        s.trees[k] = ProofTree(k, ProofNode(None))
        s.status[k] = v
    return s


def test_acceptance_rules():
    a = _store({"p": "open", "q": "discharged"})
    assert guard_acceptance(a, _store({"p": "open", "q": "discharged"}), "p") == "noProgress"
    assert guard_acceptance(a, _store({"p": "discharged", "q": "open", "r": "open"}), "p") == "accepted"
    assert guard_acceptance(a, _store({"p": "open", "q": "open"}), "p") == "partial"


def test_rollback_restores_snapshot_bytes(seed, seed_store):
    sess = RepairSession(seed, seed_store)
    sess.begin("M1:stop_empty/j/EQL")
    before = (serialize_json(seed), seed_store.dumps())
    # a guard edit that changes POs without discharging the target
    sess.step(AtomicRepair("addGuard", {"machine": "M1", "event": "find_better", "guard_label": "g9",
                                        "guard_content": "n >= 1"}))
    assert sess.changed_model()
    sess.rollback()
    assert (serialize_json(sess.d), sess.store.dumps()) == before


def test_records_are_jsonl(tmp_path, seed, seed_store):
    sess = RepairSession(seed, seed_store)
    sess.begin("M1:find_not_better/FUN_3/INV")
    sess.step(GRD7)
    sess.write_log(tmp_path / "repairs.jsonl")
    [row] = read_log(tmp_path / "repairs.jsonl")
    assert row["outcome"] == "accepted" and AtomicRepair.from_json(row["repair"]) == GRD7
    assert json.loads(RepairRecord(1, "p", GRD7, "noProgress").dumps())["seq"] == 1
