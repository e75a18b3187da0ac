from __future__ import annotations

import json
from fractions import Fraction

import pytest

from ebforge.agent import (
    GluingRejected, Limits, PlanInvalid, RequirementDoc, RunConfig, ScriptedProposer,
    ScriptExhausted, ScriptMismatch, SynthesisFailed, UnknownRequirementId, Validated,
    InvalidResponse, compute_metrics, plan_refinement, repair_loop, run_pipeline,
    synthesize_step, validate_gluing, validate_plan,
)
from ebforge.agent.plan import Requirement
from ebforge.frontend import parse_text
from ebforge.mc import Bounds, explore
from ebforge.proof import Budget, prove_all
from ebforge.repair import AtomicRepair, compile_edit
from ebforge.semantics import development_pos, generate_pos


@pytest.fixture(scope="module")
def doc(corpus):
    return RequirementDoc.load(corpus / "minsearch.req.json")


@pytest.fixture(scope="module")
def script(corpus):
    return ScriptedProposer.from_file(corpus / "minsearch.script.jsonl").responses


def proposer(responses):
    return Validated(ScriptedProposer(responses))


NULL_BOUNDS = {"task": "suggestBounds", "payload": None}


# -- planning ------------------------------------------------------------------------------

def test_golden_plan(doc, script):
    plan = plan_refinement(doc, proposer(script[:1]))
    assert [s.requirements for s in plan.steps] == [
        ("EQP-1", "EQP-2", "FUN-1"), ("FUN-2", "FUN-3", "FUN-4", "FUN-5", "FUN-6")]
    assert plan.steps[0].gluing == () and plan.steps[1].gluing


def test_single_requirement_plan():
    d = RequirementDoc((Requirement("FUN-1", "FUN", "x"),))
    plan = validate_plan({"steps": [{"requirements": ["FUN-1"]}]}, d)
    assert len(plan.steps) == 1


@pytest.mark.parametrize("steps, why", [
    ([{"requirements": ["FUN-1"]}, {"requirements": ["FUN-1", "FUN-2"]}], "assigned to steps"),
    ([{"requirements": ["FUN-1"]}], "not assigned"),
    ([{"requirements": ["FUN-1", "FUN-2"], "gluing": ["g"]}], "first step"),
    ([{"requirements": ["FUN-9", "FUN-1", "FUN-2"]}], "unknown"),
    ([{"requirements": []}, {"requirements": ["FUN-1", "FUN-2"]}], "empty"),
    ([{"stepIndex": 2, "requirements": ["FUN-1", "FUN-2"]}], "index"),
])
def test_plan_partition_rules(steps, why):
    d = RequirementDoc((Requirement("FUN-1", "FUN", ""), Requirement("FUN-2", "FUN", "")))
    with pytest.raises(PlanInvalid, match=why):
        validate_plan({"steps": steps}, d)


def test_plan_retries_then_gives_up(doc):
    bad = {"task": "plan", "payload": {"steps": [{"requirements": ["FUN-1"]}]}}
    with pytest.raises(PlanInvalid, match="after 2 attempts"):
        plan_refinement(doc, proposer([bad, bad]), retries=2)


def test_requirement_ids_validated():
    with pytest.raises(ValueError):
        RequirementDoc((Requirement("fun1", "FUN", ""),))
    with pytest.raises(ValueError):
        RequirementDoc((Requirement("A-1", "A", ""), Requirement("A-1", "A", "")))


# -- synthesis -----------------------------------------------------------------------------

def test_synthesis_repairs_ill_formed_model(doc, script):
    plan = validate_plan(script[0]["payload"], doc)
    p = ScriptedProposer(script[1:3])
    d, attempts = synthesize_step(plan, 1, None, Validated(p), doc)
    assert attempts == 2 and [m.name for m in d.machines] == ["M0"] and p.remaining() == 0


def test_synthesis_gives_up_after_limit(doc, script):
    plan = validate_plan(script[0]["payload"], doc)
    with pytest.raises(SynthesisFailed) as exc:
        synthesize_step(plan, 1, None, proposer([script[1]] * 5), doc, limit=5)
    assert exc.value.diagnostics


def test_second_step_must_refine_previous(doc, script):
    plan = validate_plan(script[0]["payload"], doc)
    d1, _ = synthesize_step(plan, 1, None, proposer(script[2:3]), doc)
    # offering the step-1 model again adds no refining machine
    with pytest.raises(SynthesisFailed):
        synthesize_step(plan, 2, d1, proposer([script[2]]), doc, limit=1)
    d2, n = synthesize_step(plan, 2, d1, proposer(script[5:6]), doc)
    assert n == 1 and [m.name for m in d2.machines] == ["M0", "M1"]


def test_invalid_reply_retried_with_error():
    p = ScriptedProposer([{"task": "suggestBounds", "payload": {"depth": 1}},
                          {"task": "suggestBounds", "payload": None}])
    assert Validated(p).ask("suggestBounds", {}) is None
    with pytest.raises(InvalidResponse):
        Validated(ScriptedProposer([{"task": "suggestBounds", "payload": 3}]), 1).ask(
            "suggestBounds", {})


def test_script_mismatch_and_exhaustion():
    p = ScriptedProposer([{"task": "plan", "payload": {}}])
    with pytest.raises(ScriptMismatch):
        p.ask("synthesize", {}, {})
    p.ask("plan", {}, {})
    with pytest.raises(ScriptExhausted):
        p.ask("plan", {}, {})


# -- gluing validation -----------------------------------------------------------------------

def test_gluing_accepts_corpus_model(minsearch):
    store = validate_gluing(minsearch, "M1", Bounds(), Budget())
    assert not store.open()


def test_gluing_rejects_contradiction(corpus):
    src = (corpus / "minsearch.eb").read_text()
    src = src.replace("    @inv8 n > 0 => j < n\n", "    @inv8 n > 0 => j < n\n    @inv9 n < 0\n")
    with pytest.raises(GluingRejected) as exc:
        validate_gluing(parse_text(src), "M1", Bounds(), Budget())
    assert exc.value.reason == "contradiction"


def test_gluing_rejects_with_trace(corpus):
    src = (corpus / "minsearch.eb").read_text().replace("@act1 j := i\n", "@act1 j := 0\n")
    with pytest.raises(GluingRejected) as exc:
        validate_gluing(parse_text(src), "M1", Bounds(), Budget())
    assert exc.value.reason == "invariantViolation"
    assert [s.event for s in exc.value.trace.steps][-1] == "find_better"


# -- repair loop -----------------------------------------------------------------------------

def test_repair_loop_discharges_seed(seed, script):
    # the seed's abstract FUN_1 is too weak for the model checker; fix that first
    fun1 = AtomicRepair.from_json(script[4]["payload"])
    d, _ = compile_edit(seed, fun1, "M0:FUN_1/WD")
    store = prove_all(development_pos(d))
    p = ScriptedProposer([NULL_BOUNDS] + script[7:9])
    res = repair_loop(d, Validated(p), RunConfig(), store=store)
    assert res.mc_verdict == "ok" and not res.store.open() and p.remaining() == 0
    assert [(r.repair.function_id, r.outcome) for r in res.records] == [
        ("strengthenGuard", "accepted"), ("addInvariant", "accepted")]
    assert store.open()


def test_model_check_phase_fixes_broken_init(broken):
    fix = {"task": "repairDecision", "payload": {"function": "updateAction", "params": {
        "event": "INITIALISATION", "action_label": "act3", "action": "searching := TRUE"}}}
    assert explore("M_broken", broken, Bounds()).requirements == ("FUN-1",)
    res = repair_loop(broken, proposer([NULL_BOUNDS, fix]), RunConfig())
    assert res.mc_verdict == "ok" and [r.outcome for r in res.records] == ["accepted"]
    assert explore("M_broken", res.d, Bounds()).ok and not res.store.open()


def test_correct_model_needs_no_repairs(minsearch):
    p = ScriptedProposer([NULL_BOUNDS])
    res = repair_loop(minsearch, Validated(p), RunConfig())
    assert res.records == [] and not res.store.open() and p.remaining() == 0


def test_limits_parse():
    assert Limits.parse("1,2,3") == Limits(1, 2, 3)
    with pytest.raises(ValueError):
        Limits(0, 1, 1)


# -- whole pipeline ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def golden(doc, script, tmp_path_factory):
    outs = []
    for k in range(2):
        out = tmp_path_factory.mktemp(f"run{k}")
        res = run_pipeline(doc, RunConfig(proposer=ScriptedProposer(script), out=out))
        outs.append((res, out))
    return outs


def test_golden_pipeline(golden):
    res, out = golden[0]
    assert res.ok, res.failures
    m = res.metrics
    assert (m.pdr, m.rc, m.rf, m.refinement_pdr) == (1.0, 1.0, 1.0, 1.0)
    assert [r.outcome for r in res.records] == ["accepted"] * 3
    assert sorted(p.name for p in out.iterdir()) == [
        "metrics.json", "plan.json", "pos.jsonl", "proofs.json", "repairs.jsonl",
        "step-1.model.json", "step-2.model.json"]


def test_pipeline_artifacts_deterministic(golden):
    (_, a), (_, b) = golden
    for f in sorted(a.iterdir()):
        assert f.read_bytes() == (b / f.name).read_bytes(), f.name


def test_one_step_plan(script):
    doc = RequirementDoc((Requirement("EQP-1", "EQP", ""), Requirement("EQP-2", "EQP", ""),
                          Requirement("FUN-1", "FUN", "")))
    plan = {"task": "plan", "payload": {"steps": [{"requirements": ["EQP-1", "EQP-2", "FUN-1"]}]}}
    p = ScriptedProposer([plan] + script[2:5])
    res = run_pipeline(doc, RunConfig(proposer=p))
    assert res.ok and len(res.steps) == 1 and p.remaining() == 0


def test_pipeline_records_missing_replies(doc, script):
    res = run_pipeline(doc, RunConfig(proposer=ScriptedProposer(script[:3])))
    assert not res.ok and "no response left" in res.failures[0]


# -- metrics ----------------------------------------------------------------------------------

def test_metrics_ratios(minsearch, doc):
    store = prove_all(development_pos(minsearch))
    keys = [p.key for p in generate_pos(minsearch, "M1")]
    m0 = compute_metrics(minsearch, store.status, doc)
    assert (m0.pdr, m0.rf) == (1.0, 1.0)
    status = dict(store.status)
    tagged = [k for k in keys if k in m0.per_requirement["FUN-5"]["pos"]]
    status[tagged[0]] = "open"
    m = compute_metrics(minsearch, status, doc)
    assert m.pdr == float(Fraction(len(keys) - 1, len(keys)))
    assert m.rc == 1.0 and m.rf < 1.0


def test_tight_budget_lowers_fulfillment(minsearch, doc):
    store = prove_all(development_pos(minsearch), Budget(nodes=1))
    m = compute_metrics(minsearch, store.status, doc)
    assert m.rc == 1.0 and m.rf < m.rc and m.pdr < 1.0


def test_unknown_requirement_tag(minsearch):
    with pytest.raises(UnknownRequirementId):
        compute_metrics(minsearch, {}, RequirementDoc((Requirement("FUN-1", "FUN", ""),)))


def test_metrics_json(minsearch, doc):
    m = compute_metrics(minsearch, {}, doc)
    data = json.loads(m.dumps())
    assert set(data) == {"pdr", "rc", "rf", "refinementPdr", "counts", "perRequirement", "perPO"}
    assert data["pdr"] == 0.0 and data["rc"] == 1.0 and data["rf"] < 1.0
    assert all(v == "open" for v in data["perPO"].values())
