"""Plan, synthesize, check, prove and repair, one refinement step at a time."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from ebforge.ast import Development
from ebforge.frontend.check import well_formed
from ebforge.frontend.diagnostics import Diagnostic, DiagnosticError, errors
from ebforge.frontend.jsonfmt import parse_json, serialize_json
from ebforge.frontend.text import serialize_text
from ebforge.mc import Bounds, explore, satisfiable
from ebforge.proof import Budget, ProofStore, prove_all, replay_all
from ebforge.repair import (
    AtomicRepair, InvalidRepair, InvalidTarget, RejectedCompile, RepairContext, RepairRecord,
    RepairSession, classify, compile_edit, recommend, summarize,
)
from ebforge.semantics import development_pos, gluing_labels, gluing_proof_order
from ebforge.agent.metrics import MetricsReport, compute_metrics
from ebforge.agent.plan import PlanInvalid, RefinementPlan, RequirementDoc, validate_plan
from ebforge.agent.proposer import InvalidResponse, ProposerError, Validated

log = logging.getLogger(__name__)


class SynthesisFailed(RuntimeError):
    def __init__(self, message: str, diagnostics: list[str]):
        super().__init__(message)
        self.diagnostics = diagnostics


class GluingRejected(RuntimeError):
    def __init__(self, reason: str, trace=None, open_pos=(), store=None):
        super().__init__(f"gluing invariants rejected: {reason}"
                         + (f" ({', '.join(open_pos)})" if open_pos else ""))
        self.reason = reason
        self.store = store
        self.trace = trace
        self.open_pos = tuple(open_pos)


@dataclass
class Limits:
    synthesis_repairs: int = 5
    po_repairs: int = 8
    queue_passes: int = 3

    def __post_init__(self):
        if min(self.synthesis_repairs, self.po_repairs, self.queue_passes) < 1:
            raise ValueError("trial limits must be at least 1")

    @classmethod
    def parse(cls, text: str) -> "Limits":
        parts = [int(x) for x in text.split(",")]
        if len(parts) != 3:
            raise ValueError("trials need synthesis,po,passes")
        return cls(*parts)


@dataclass
class RunConfig:
    proposer: object = None
    bounds: Bounds = field(default_factory=Bounds)
    limits: Limits = field(default_factory=Limits)
    budget: Budget = field(default_factory=Budget)
    out: Path | None = None
    continue_on_open: bool = False
    response_retries: int = 3


# -- synthesis -------------------------------------------------------------------------

def _merge(prev: Development | None, new: Development) -> Development:
    if prev is None:
        return new
    ctx = {c.name: c for c in prev.contexts}
    order = [c.name for c in prev.contexts]
    for c in new.contexts:
        if c.name not in ctx:
            order.append(c.name)
        ctx[c.name] = c
    mach = {m.name: m for m in prev.machines}
    morder = [m.name for m in prev.machines]
    for m in new.machines:
        if m.name not in mach:
            morder.append(m.name)
        mach[m.name] = m
    return Development(tuple(ctx[n] for n in order), tuple(mach[n] for n in morder))


def _step_diagnostics(d: Development, prev: Development | None, step) -> list[str]:
    out = [str(e) for e in errors(well_formed(d))]
    if out:
        return out
    have = len(prev.machines) if prev else 0
    if len(d.machines) != have + 1:
        return [f"step {step.index} must add exactly one machine (found {len(d.machines) - have})"]
    m = d.machines[-1]
    if prev is not None and prev.machines and m.refines != prev.machines[-1].name:
        return [f"machine {m.name} must refine {prev.machines[-1].name}"]
    if step.gluing and not gluing_labels(d, m):
        return [f"machine {m.name} has no invariant relating abstract and concrete variables "
                f"for the gluing descriptions: " + "; ".join(step.gluing)]
    return []


def synthesize_step(plan: RefinementPlan, i: int, prev: Development | None, p: Validated,
                    doc: RequirementDoc, limit: int = 5) -> tuple[Development, int]:
    """Returns the merged development through step ``i`` and the number of attempts."""
    step = plan.step(i)
    payload = {"step": step.to_json(),
               "requirements": [doc.get(r).__dict__ for r in step.requirements],
               "previous": json.loads(serialize_json(prev)) if prev is not None else None}
    diags: list[str] = []
    for attempt in range(1, limit + 1):
        if diags:
            payload = dict(payload, diagnostics=diags)
        reply = p.ask("synthesize", payload)
        try:
            new = parse_json(reply, check=False)
        except DiagnosticError as exc:
            diags = [str(x) for x in exc.diagnostics]
            continue
        d = _merge(prev, new)
        diags = _step_diagnostics(d, prev, step)
        if not diags:
            return d, attempt
        payload = dict(payload, current=reply)
    raise SynthesisFailed(f"step {i}: no well-formed model after {limit} attempts", diags)


# -- gluing validation -------------------------------------------------------------------

def validate_gluing(d: Development, machine: str, bounds: Bounds, budget: Budget,
                    store: ProofStore | None = None) -> ProofStore:
    """Model-check the refining machine, then prove its gluing POs before the rest.

    With ``store`` the recorded statuses are checked instead of proving again.
    """
    if not satisfiable(d, machine, bounds):
        raise GluingRejected("contradiction", store=store)
    res = explore(machine, d, bounds)
    if not res.ok:
        raise GluingRejected(res.verdict, trace=res.trace, store=store)
    pos = development_pos(d)
    glue = [p for p in gluing_proof_order(pos) if p.gluing and p.machine == machine]
    if store is None:
        store = prove_all(glue, budget)
        store = prove_all([p for p in pos if p not in glue], budget, store)
    open_ = [p.key for p in glue if store.status.get(p.key) != "discharged"]
    if open_:
        raise GluingRejected("open gluing obligations", open_pos=open_, store=store)
    return store


# -- repair loop ---------------------------------------------------------------------------

@dataclass
class LoopResult:
    d: Development
    store: ProofStore
    records: list[RepairRecord]
    mc_verdict: str


class _Log:
    def __init__(self, records: list[RepairRecord]):
        self.records = records

    def add(self, po: str, r: AtomicRepair, outcome: str, note: str = "", **kw) -> RepairRecord:
        rec = RepairRecord(len(self.records) + 1, po, r, outcome, note=note, **kw)
        self.records.append(rec)
        return rec


def _decision(p: Validated, payload: dict) -> AtomicRepair | None:
    reply = p.ask("repairDecision", payload)
    return None if reply is None else AtomicRepair.from_json(reply)


def _phase_one(d: Development, machine: str, p: Validated, cfg: RunConfig, log_: _Log,
               bounds: Bounds) -> tuple[Development, str]:
    res = explore(machine, d, bounds)
    tries = 0
    while not res.ok and tries < cfg.limits.po_repairs:
        tries += 1
        payload = {"phase": "modelCheck", "machine": machine, "observation": res.observation(),
                   "counterexample": res.to_json(), "model": serialize_text(d)}
        r = _decision(p, payload)
        if r is None:
            break
        try:
            new_d, _ = compile_edit(d, r, f"{machine}:")
        except (RejectedCompile, InvalidRepair, InvalidTarget) as exc:
            log_.add("", r, "rejectedCompile", str(exc), observation=res.observation())
            continue
        new_res = explore(machine, new_d, bounds)
        if new_res.ok or (new_res.verdict == res.verdict and new_res.violated != res.violated):
            log_.add("", r, "accepted" if new_res.ok else "noProgress",
                     note=f"model checker: {res.verdict} -> {new_res.verdict}",
                     observation=new_res.observation())
            d, res = new_d, new_res
        else:
            log_.add("", r, "noProgress", note=f"model checker still reports {new_res.verdict}",
                     observation=new_res.observation())
    return d, res.verdict


def _open_in_order(d: Development, store: ProofStore) -> list:
    pos = gluing_proof_order(development_pos(d))
    return [po for po in pos if store.status.get(po.key) != "discharged"]


def repair_loop(d: Development, p: Validated, cfg: RunConfig, store: ProofStore | None = None,
                records: list[RepairRecord] | None = None, ask_bounds: bool = True) -> LoopResult:
    records = records if records is not None else []
    log_ = _Log(records)
    machine = d.machines[-1].name
    bounds = cfg.bounds
    if ask_bounds:
        reply = p.ask("suggestBounds", {"machine": machine, "defaults": cfg.bounds.to_json()})
        if reply is not None:
            bounds = Bounds.from_json(reply)
    before = serialize_json(d)
    d, verdict = _phase_one(d, machine, p, cfg, log_, bounds)

    pos = development_pos(d)
    if store is None:
        store = prove_all(pos, cfg.budget)
    elif serialize_json(d) != before or set(store.keys()) != {po.key for po in pos}:
        store = replay_all(d, store, pos, cfg.budget)
    ctx = RepairContext(budget=cfg.budget, bounds=bounds)
    for _ in range(cfg.limits.queue_passes):
        queue = _open_in_order(d, store)
        if not queue:
            break
        progress = False
        for po in queue:
            if store.status.get(po.key) == "discharged":
                continue
            sess = RepairSession(d, store, ctx)
            sess.begin(po.key)
            history: list[RepairRecord] = []
            done = False
            for _ in range(cfg.limits.po_repairs):
                cur = next((x for x in development_pos(sess.d) if x.key == po.key), None)
                if cur is None:
                    break
                summary = summarize(cur, sess.store.tree(po.key), history)
                cats = classify(summary)
                rules = recommend(cats, summary)
                payload = {"phase": "proof", "po": po.key, "summary": summary.to_json(),
                           "categories": [c.name for c in cats],
                           "rules": [r.to_json() for r in rules],
                           "model": serialize_text(sess.d),
                           "history": [h.to_json() for h in history]}
                r = _decision(p, payload)
                if r is None:
                    break
                try:
                    rec, verdict = sess.step(r)
                except (InvalidRepair, InvalidTarget) as exc:
                    rec = RepairRecord(len(sess.log) + 1, po.key, r, "rejectedCompile", note=str(exc))
                    sess.log.append(rec)
                    verdict = "rejectedCompile"
                history.append(rec)
                if verdict == "accepted":
                    done = True
                    break
            for rec in sess.log:
                log_.add(rec.po_name, rec.repair, rec.outcome, rec.note, delta=rec.delta,
                         observation=rec.observation, introduced_label=rec.introduced_label)
            if done:
                changed = sess.changed_model()
                sess.commit()
                d, store = sess.d, sess.store
                progress = True
                if changed:
                    d, verdict = _phase_one(d, machine, p, cfg, log_, bounds)
            else:
                sess.rollback()
        if not progress:
            break
    return LoopResult(d, store, records, verdict)


# -- whole pipeline ---------------------------------------------------------------------------

@dataclass
class PipelineResult:
    plan: RefinementPlan | None
    d: Development | None
    store: ProofStore
    metrics: MetricsReport | None
    records: list[RepairRecord]
    failures: list[str]
    steps: list[Development]

    @property
    def ok(self) -> bool:
        return not self.failures and self.metrics is not None and not self.store.open()


def plan_refinement(doc: RequirementDoc, p: Validated, retries: int = 3) -> RefinementPlan:
    if not doc.requirements:
        raise PlanInvalid("empty requirement document")
    payload = {"requirements": doc.to_json()["requirements"]}
    last = None
    for _ in range(retries):
        reply = p.ask("plan", payload)
        try:
            return validate_plan(reply, doc)
        except PlanInvalid as exc:
            last = exc
            payload = dict(payload, lastError=str(exc))
    raise PlanInvalid(f"no valid plan after {retries} attempts: {last}")


def _write(out: Path | None, name: str, data: str) -> None:
    if out is None:
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(data, encoding="utf-8")


def write_artifacts(out: Path | None, res: PipelineResult) -> None:
    if out is None:
        return
    if res.plan is not None:
        _write(out, "plan.json", json.dumps(res.plan.to_json(), indent=2, sort_keys=True) + "\n")
    for k, d in enumerate(res.steps, start=1):
        _write(out, f"step-{k}.model.json", serialize_json(d).decode())
    if res.d is not None:
        lines = []
        st = res.store
        for po in development_pos(res.d):
            lines.append(json.dumps({"name": po.key, "kind": po.kind, "sequent": po.sequent.text(),
                                     "origin": list(po.origin_labels),
                                     "refinementPO": po.refinement_po, "gluing": po.gluing,
                                     "status": st.status.get(po.key, "open")}, sort_keys=True))
        _write(out, "pos.jsonl", "".join(x + "\n" for x in lines))
    _write(out, "proofs.json", json.dumps(res.store.to_json(), indent=1, sort_keys=True) + "\n")
    _write(out, "repairs.jsonl", "".join(r.dumps() + "\n" for r in res.records))
    if res.metrics is not None:
        m = res.metrics.to_json()
        if res.failures:
            m["failures"] = list(res.failures)
        _write(out, "metrics.json", json.dumps(m, indent=2, sort_keys=True) + "\n")


def run_pipeline(doc: RequirementDoc, cfg: RunConfig) -> PipelineResult:
    p = cfg.proposer if isinstance(cfg.proposer, Validated) else Validated(cfg.proposer,
                                                                           cfg.response_retries)
    records: list[RepairRecord] = []
    failures: list[str] = []
    steps: list[Development] = []
    d: Development | None = None
    store = ProofStore()
    plan = None
    try:
        plan = plan_refinement(doc, p)
        for step in plan.steps:
            try:
                new_d, attempts = synthesize_step(plan, step.index, d, p, doc,
                                                  cfg.limits.synthesis_repairs)
            except SynthesisFailed as exc:
                failures.append(f"step {step.index}: {exc} ({'; '.join(exc.diagnostics[:3])})")
                break
            log.info("step %d synthesized after %d attempt(s)", step.index, attempts)
            machine = new_d.machines[-1].name
            first = None
            if step.index > 1:
                try:
                    first = validate_gluing(new_d, machine, cfg.bounds, cfg.budget)
                except GluingRejected as exc:
                    log.info("step %d: %s", step.index, exc)
                    first = exc.store
            res = repair_loop(new_d, p, cfg, store=first, records=records)
            d, store = res.d, res.store
            if step.index > 1:
                try:
                    validate_gluing(d, machine, cfg.bounds, cfg.budget, store)
                except GluingRejected as exc:
                    failures.append(f"step {step.index}: {exc}")
            steps.append(d)
            open_ref = [po.key for po in development_pos(d)
                        if po.refinement_po and store.status.get(po.key) != "discharged"]
            if open_ref and step.index < len(plan.steps) and not cfg.continue_on_open:
                failures.append(f"step {step.index}: open refinement obligations "
                                + ", ".join(open_ref))
                break
    except (PlanInvalid, ProposerError, InvalidResponse) as exc:
        failures.append(str(exc))
    metrics = compute_metrics(d, store.status, doc) if d is not None else None
    out = PipelineResult(plan, d, store, metrics, records, failures, steps)
    write_artifacts(Path(cfg.out) if cfg.out else None, out)
    return out
