from __future__ import annotations

from dataclasses import replace

from ebforge.ast import LabeledPred
from ebforge.frontend import parse_pred
from ebforge.proof import ProofStore, Tactic, apply_tactic, prove_all, replay_all
from ebforge.semantics import development_pos


def test_replay_without_change_is_byte_identical(seed, seed_store):
    again = replay_all(seed, seed_store, development_pos(seed))
    assert again.dumps() == seed_store.dumps()


def test_strengthened_guard_keeps_closed_proofs_closed(seed, seed_store):
    m = seed.machine("M1")
    ev = m.event("find_better")
    ev2 = replace(ev, guards=ev.guards + (LabeledPred("grd9", parse_pred("n >= 1")),))
    d = seed.replace_machine(replace(m, events=tuple(ev2 if e.name == ev.name else e for e in m.events)))
    after = replay_all(d, seed_store, development_pos(d))
    for k in seed_store.discharged():
        if k in after:
            assert after.status[k] == "discharged", k


def test_removing_an_axiom_truncates_dependent_proofs(minsearch):
    pos = development_pos(minsearch)
    store = prove_all(pos)
    c = minsearch.contexts[0]
    # weakening the total function to a partial one removes the facts WD proofs relied on
    weak = replace(c.axioms[1], pred=parse_pred("f : 0..n - 1 +-> NAT"))
    d = minsearch.replace_context(replace(c, axioms=(c.axioms[0], weak)))
    after = replay_all(d, store, development_pos(d))
    assert "M0:FUN_1/WD" in after.open()
    assert set(after.open()) <= set(store.keys())


def test_roots_match_regenerated_sequents(seed, seed_store):
    pos = {p.key: p for p in development_pos(seed)}
    for k in seed_store.keys():
        assert seed_store.tree(k).root.sequent == pos[k].sequent


def test_apply_tactic_copies(seed, seed_store):
    key = "M1:stop_empty/j/EQL"
    tree = seed_store.tree(key)
    path, _ = tree.first_open()
    before = seed_store.dumps()
    new = apply_tactic(tree, list(path), Tactic("cut", ("n = 0 => j = 0",)))
    assert seed_store.dumps() == before
    assert new.root.size() > tree.root.size()


def test_snapshot_is_independent(seed_store):
    snap = seed_store.snapshot()
    snap.status["M0:FUN_1/WD"] = "discharged"
    assert seed_store.status["M0:FUN_1/WD"] == "open"
    assert isinstance(snap, ProofStore)
