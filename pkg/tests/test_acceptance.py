"""Acceptance criteria; each test prints one PASS/FAIL line."""
from __future__ import annotations

import json
import random
import time
from dataclasses import replace

from ebforge.agent import RequirementDoc, RunConfig, ScriptedProposer, run_pipeline
from ebforge.frontend import load, render, parse_json, parse_text, serialize_json, serialize_text
from ebforge.mc import Bounds, evaluate, explore, replay_trace
from ebforge.proof import Budget, InapplicableTactic, Tactic, auto_prove, prove_all
from ebforge.proof.tree import expand
from ebforge.repair import (
    AtomicRepair, ProofStateSummary, RepairContext, apply_repair, classify, summarize,
)
from ebforge.semantics import development_pos, gluing_labels

from tests_support import (
    criterion, ground_sequent, linear_sequent, random_machine_text, valid_by_enumeration,
    valid_by_evaluation,
)


def _shape(m):
    """Machine structure with invariant order ignored."""
    return (m.name, m.refines, m.sees, tuple(m.variables),
            sorted((i.label, render(i.pred)) for i in m.invariants), m.events)


def test_1_golden_pipeline(corpus, tmp_path):
    with criterion(1, "golden pipeline run") as notes:
        doc = RequirementDoc.load(corpus / "minsearch.req.json")
        t0 = time.perf_counter()
        res = run_pipeline(doc, RunConfig(
            proposer=ScriptedProposer.from_file(corpus / "minsearch.script.jsonl"), out=tmp_path))
        wall = time.perf_counter() - t0
        assert res.ok, res.failures
        golden = load(corpus / "minsearch.eb")
        assert [m.name for m in res.d.machines] == ["M0", "M1"]
        assert res.d.contexts == golden.contexts
        for got, want in zip(res.d.machines, golden.machines):
            assert _shape(got) == _shape(want), got.name
        m1 = res.d.machine("M1")
        assert [e.name for e in m1.events] == [
            "INITIALISATION", "find_better", "find_not_better", "stop", "stop_empty"]
        assert render(m1.event("find_not_better").guards[-1].pred) == "1 <= i"
        assert gluing_labels(res.d, m1)
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert (metrics["pdr"], metrics["rc"], metrics["rf"], metrics["refinementPdr"]) == (
            1.0, 1.0, 1.0, 1.0)
        assert wall < 60
        notes.append(f"pipeline {wall:.1f}s, {metrics['counts']['finalPOs']} final POs")


FUN1 = AtomicRepair("strengthenInvariant", {
    "label": "FUN_1", "content": "has_j = TRUE & j : dom(f) => f(j) = min(ran(f))"})
INV6 = AtomicRepair("addInvariant", {"label": "inv6", "content": "n = 0 => j = 0"})
GRD7 = AtomicRepair("strengthenGuard", {"event": "find_not_better", "guard_label": "grd7",
                                        "guard_content": "1 <= i"})


def test_2_regression_repairs(seed, seed_store):
    with criterion(2, "repair regression triple"):
        _, _, a, va = apply_repair(seed, seed_store, FUN1, "M0:FUN_1/WD")
        assert va == "accepted" and a.delta["M0:FUN_1/WD"] == ["open", "discharged"]
        _, _, b, vb = apply_repair(seed, seed_store, INV6, "M1:stop_empty/j/EQL")
        assert vb == "accepted" and b.delta == {
            "M1:INITIALISATION/inv6/INV": [None, "discharged"],
            "M1:find_better/inv6/INV": [None, "discharged"],
            "M1:stop_empty/inv6/INV": [None, "discharged"],
            "M1:stop_empty/j/EQL": ["open", "discharged"]}
        _, _, c, vc = apply_repair(seed, seed_store, GRD7, "M1:find_not_better/FUN_3/INV")
        assert vc == "accepted"
        assert c.delta["M1:find_not_better/FUN_3/INV"] == ["open", "discharged"]


def test_3_counterexample(broken):
    with criterion(3, "broken initialization counterexample"):
        t0 = time.perf_counter()
        res = explore("M_broken", broken, Bounds())
        assert res.verdict == "invariantViolation"
        assert len(res.trace.steps) == 1 and res.trace.steps[0].event == "INITIALISATION"
        assert res.violated == ("FUN_1",) and res.requirements == ("FUN-1",)
        assert replay_trace(res.trace, "M_broken", broken)
        fun1 = next(i for i in broken.machine("M_broken").invariants if i.label == "FUN_1")
        env = {**res.trace.constants, **res.trace.steps[-1].state}
        assert evaluate(fun1.pred, env) is False
        assert time.perf_counter() - t0 < 5


def test_4_po_mc_agreement():
    with criterion(4, "PO/model-checker agreement on random machines") as notes:
        r = random.Random(2024)
        bad = []
        counts = {"proved": 0, "violated": 0}
        for n in range(50):
            d = parse_text(random_machine_text(r))
            pos = [p for p in development_pos(d) if p.kind == "INV"]
            store = prove_all(pos)
            res = explore("R", d, Bounds(-2, 2, 1, 10, 20000))
            all_inv = not store.open()
            counts["proved"] += all_inv
            counts["violated"] += res.verdict == "invariantViolation"
            if all_inv and not res.ok:
                bad.append((n, "all INV POs discharged but exploration reports " + res.verdict))
            if res.verdict == "invariantViolation" and all_inv:
                bad.append((n, "violation without an open INV PO"))
        assert not bad, bad
        # both directions must actually be exercised
        assert counts["proved"] >= 3 and counts["violated"] >= 3
        notes.append(f"{counts['proved']} fully proved, {counts['violated']} violating")


def _edit_pool(r: random.Random):
    inv = ["i : NAT", "j <= n", "n >= 0", "j >= 0", "searching = TRUE => i >= 1", "i <= n + 1",
           "has_j = TRUE => searching = FALSE", "j : NAT"]
    grd = ["n >= 1", "i < n", "j <= i", "i >= 1", "j >= 0", "n > 0"]
    events = ["find_better", "find_not_better", "stop", "stop_empty"]
    k = r.randrange(6)
    if k == 0:
        return AtomicRepair("addInvariant", {"machine": "M1", "label": f"rnd{r.randrange(10**6)}",
                                             "content": r.choice(inv)})
    if k == 1:
        return AtomicRepair("strengthenGuard", {"machine": "M1", "event": r.choice(events),
                                                "guard_label": r.choice(["grd1", "grd2", "grdx"]),
                                                "guard_content": r.choice(grd)})
    if k == 2:
        return AtomicRepair("addGuard", {"machine": "M1", "event": r.choice(events),
                                         "guard_label": f"g{r.randrange(10**6)}",
                                         "guard_content": r.choice(grd)})
    if k == 3:
        return AtomicRepair("addTheorem", {"context": "C0", "label": f"thm{r.randrange(10**6)}",
                                           "content": r.choice(["n >= 0", "n : NAT", "0 <= n + 1"])})
    if k == 4:
        return AtomicRepair("addAxiom", {"context": "C0", "label": f"ax{r.randrange(10**6)}",
                                         "content": r.choice(["n <= 3", "n < 10", "n >= 0"])})
    return AtomicRepair("strengthenInvariant", {"machine": "M0", "label": "FUN_1",
                                                "content": FUN1.params["content"]})


def test_5_replay_soundness(seed, seed_store):
    with criterion(5, "no stale proofs after random accepted edits") as notes:
        r = random.Random(7)
        d, store = seed, seed_store
        # proving power is irrelevant here, only which entries claim success
        ctx = RepairContext(budget=Budget(nodes=400, seconds=0.5))
        accepted = attempts = 0
        while accepted < 30:
            attempts += 1
            assert attempts < 200, "too few edits accepted"
            d2, store2, rec, verdict = apply_repair(d, store, _edit_pool(r), None, ctx)
            if verdict.startswith("rejected"):
                continue
            accepted += 1
            d, store = d2, store2
            pos = {p.key: p for p in development_pos(d)}
            assert set(store.keys()) == set(pos)
            stale = [k for k in store.discharged() if store.tree(k).root.sequent != pos[k].sequent]
            assert not stale, stale
        notes.append(f"{accepted} accepted of {attempts} attempted")


def test_6_prover_soundness():
    with criterion(6, "prover soundness and linear arithmetic") as notes:
        r = random.Random(20240)
        closed = 0
        for _ in range(10_000):
            s = ground_sequent(r)
            if auto_prove(s, Budget(nodes=300)).closed:
                closed += 1
                assert valid_by_evaluation(s) is not False, s.text()
        r = random.Random(99)
        valid = 0
        for _ in range(1000):
            s = linear_sequent(r)
            try:
                got = expand(s, Tactic("linArith")) == []
            except InapplicableTactic:
                got = False
            want = valid_by_enumeration(s)
            valid += want
            assert got == want, s.text()
        notes.append(f"{closed} ground closed, {valid} linear valid")


def test_7_round_trips(corpus):
    with criterion(7, "round trips and byte determinism") as notes:
        files = sorted(corpus.glob("*.eb")) + sorted(corpus.glob("*.ebj"))
        for f in files:
            d = load(f)
            assert parse_text(serialize_text(d)) == d, f.name
            assert parse_json(serialize_json(d)) == d, f.name
            assert serialize_json(d) == serialize_json(load(f))
            assert serialize_text(d) == serialize_text(load(f))
        for f in sorted(corpus.glob("*.eb")):
            assert serialize_json(load(f)) == f.with_suffix(".ebj").read_bytes(), f.name
        notes.append(f"{len(files)} files")


S = ProofStateSummary
CLASSIFIER_ROWS = [
    (S("M:e/inv/INV", "INV", "contradiction"), [1]),
    (S("M:e/inv/INV", "INV", "definitional"), [2]),
    (S("M:e/inv/INV", "INV", "existential"), [3]),
    (S("M:e/x/EQL", "EQL"), [4]),
    (S("M:e/x/EQL", "EQL", "contradiction"), [1, 4]),
    (S("M:e/grd/GRD", "GRD", "equalityCrossRefinement"), [4]),
    (S("M:inv/WD", "WD"), [5]),
    (S("M:e/grd1/WD", "WD", origin_element="M/events/e/guards/grd1"), [5]),
    (S("M:e/grd1/WD", "WD", "existential"), [3, 5]),
    (S("M:e/inv/INV", "INV", quantified_invariant="forall"), [6]),
    (S("M:e/inv/INV", "INV", quantified_invariant="exists"), [6]),
    (S("M:e/inv/INV", "INV", "universalGoal"), [6]),
    (S("M:e/inv/INV", "INV", uninstantiated_universal=("ax_univ",)), [7]),
    (S("M:e/a/FIS", "FIS", uninstantiated_universal=("h",)), [7]),
    (S("M:e/x/EQL", "EQL", uninstantiated_universal=("h",)), [7, 4]),
    (S("M:inv/WD", "WD", "contradiction", uninstantiated_universal=("h",)), [7, 1, 5]),
    (S("M:e/inv/INV", "INV", "definitional", quantified_invariant="forall"), [2, 6]),
    (S("M:e/inv/INV", "INV"), ["default"]),
    (S("M:e/a/FIS", "FIS"), ["default"]),
    (S("M:e/grd/GRD", "GRD"), ["default"]),
    (S("M:e/SIM", "SIM"), ["default"]),
    (S("M:e/FIS", "FIS", "universalGoal"), ["default"]),
    (S("M:e/GRD", "GRD", "contradiction"), [1]),
]


def test_8_classifier_table(seed, seed_store):
    with criterion(8, "classifier conformance table") as notes:
        assert len(CLASSIFIER_ROWS) >= 20
        for row, (summary, want) in enumerate(CLASSIFIER_ROWS):
            assert [c.id for c in classify(summary)] == want, (row, summary)
        pos = {p.key: p for p in development_pos(seed)}
        real = {"M1:find_not_better/FUN_3/INV": ["default"], "M0:FUN_1/WD": [5],
                "M1:stop_empty/j/EQL": [4]}
        for key, want in real.items():
            got = [c.id for c in classify(summarize(pos[key], seed_store.tree(key)))]
            assert all(w in got for w in want) and (want != ["default"] or got == want), (key, got)
        notes.append(f"{len(CLASSIFIER_ROWS)} table rows, {len(real)} corpus states")
