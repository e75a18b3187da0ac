"""Atomic repair functions over a development and its proof store."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from ebforge.ast import Action, Development, LabeledPred, Pred, check_ident, conj
from ebforge.frontend.check import well_formed
from ebforge.frontend.diagnostics import errors
from ebforge.frontend.formula import ParseError, parse_action, parse_pred, render
from ebforge.frontend.jsonfmt import serialize_json
from ebforge.mc import Bounds, explore, satisfiable
from ebforge.proof import Budget, InapplicableTactic, ProofStore, Tactic, apply_tactic, replay_all
from ebforge.semantics import development_pos

OUTCOMES = ("accepted", "rejectedCompile", "rejectedMC", "noProgress")
MODEL, PROOF, JOINT, INFO = "model", "proof", "joint", "info"


class InvalidRepair(ValueError):
    """Parameters do not match the function's schema."""


class InvalidTarget(KeyError):
    """The named element, obligation or proof node does not exist."""


class _Compile(ValueError):
    pass


@dataclass(frozen=True)
class AtomicRepair:
    function_id: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"function": self.function_id, "params": dict(self.params)}

    @classmethod
    def from_json(cls, d: dict) -> "AtomicRepair":
        return cls(d["function"], dict(d.get("params", {})))

    def __hash__(self):
        return hash((self.function_id, json.dumps(self.params, sort_keys=True)))


@dataclass
class RepairRecord:
    seq: int
    po_name: str
    repair: AtomicRepair
    outcome: str
    delta: dict = field(default_factory=dict)
    note: str = ""
    observation: str = ""
    introduced_label: str = ""

    def to_json(self) -> dict:
        out = {"seq": self.seq, "po": self.po_name, "repair": self.repair.to_json(),
               "outcome": self.outcome, "delta": self.delta}
        if self.note:
            out["note"] = self.note
        if self.observation:
            out["observation"] = self.observation
        if self.introduced_label:
            out["introducedLabel"] = self.introduced_label
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)


@dataclass
class RepairContext:
    budget: Budget = field(default_factory=Budget)
    bounds: Bounds = field(default_factory=Bounds)
    mc_guard: bool = True
    _mc_cache: dict = field(default_factory=dict)

    def mc_ok(self, d: Development, machine: str) -> bool:
        key = (serialize_json(d), machine, json.dumps(self.bounds.to_json(), sort_keys=True))
        if key not in self._mc_cache:
            self._mc_cache[key] = explore(machine, d, self.bounds).ok
        return self._mc_cache[key]


# -- parameter schemas -----------------------------------------------------------

@dataclass(frozen=True)
class Spec:
    kind: str
    required: tuple[str, ...]
    optional: tuple[str, ...] = ()


REGISTRY: dict[str, Spec] = {
    "addInvariant": Spec(MODEL, ("label", "content"), ("machine", "requirements")),
    "strengthenInvariant": Spec(MODEL, ("label", "content"), ("machine",)),
    "addGuard": Spec(MODEL, ("event", "guard_label", "guard_content"), ("machine", "requirements")),
    "strengthenGuard": Spec(MODEL, ("event", "guard_label", "guard_content"), ("machine", "requirements")),
    "addAction": Spec(MODEL, ("event", "action_label", "action"), ("machine", "requirements")),
    "updateAction": Spec(MODEL, ("event", "action_label", "action"), ("machine",)),
    "addAxiom": Spec(MODEL, ("label", "content"), ("context", "requirements")),
    "addTheorem": Spec(MODEL, ("label", "content"), ("context", "machine")),
    "instantiateHypothesis": Spec(PROOF, ("hyp_label", "terms"), ("po", "node_path")),
    "addLemma": Spec(PROOF, ("lemma",), ("po", "node_path")),
    "unfoldDefinition": Spec(PROOF, ("hyp_label",), ("po", "node_path")),
    "addAxiomAndInjectHypothesis": Spec(JOINT, ("label", "content"), ("context", "po", "requirements")),
    "runModelChecker": Spec(INFO, (), ("machine", "bounds")),
}


def validate(r: AtomicRepair) -> Spec:
    spec = REGISTRY.get(r.function_id)
    if spec is None:
        raise InvalidRepair(f"unknown repair function {r.function_id!r}")
    missing = [k for k in spec.required if k not in r.params]
    extra = [k for k in r.params if k not in spec.required + spec.optional]
    if missing or extra:
        raise InvalidRepair(f"{r.function_id}: missing {missing}, unexpected {extra}")
    for k, v in r.params.items():
        if k in ("terms", "requirements", "node_path"):
            if not isinstance(v, list):
                raise InvalidRepair(f"{r.function_id}.{k} must be a list")
        elif k == "bounds":
            if not isinstance(v, (str, dict)):
                raise InvalidRepair(f"{r.function_id}.bounds must be text or an object")
        elif not isinstance(v, str):
            raise InvalidRepair(f"{r.function_id}.{k} must be a string")
    return spec


# -- model edits ------------------------------------------------------------------

def _pred(text: str) -> Pred:
    try:
        return parse_pred(text)
    except ParseError as exc:
        raise _Compile(f"syntax error in {text!r}: {exc}") from None


def _label(text: str) -> str:
    try:
        check_ident(text, "label")
    except ValueError as exc:
        raise _Compile(str(exc)) from None
    return text


def _machine_name(d: Development, params: dict, target: str | None) -> str:
    name = params.get("machine") or (target.split(":", 1)[0] if target and ":" in target else None)
    if name is None:
        name = d.machines[-1].name if d.machines else None
    if name is None or not d.has_machine(name):
        raise InvalidTarget(f"no machine {name!r}")
    return name


def _context_name(d: Development, params: dict, target: str | None) -> str:
    name = params.get("context")
    if name is None:
        seen = d.seen_contexts(_machine_name(d, params, target))
        if not seen:
            raise InvalidTarget("machine sees no context")
        name = seen[-1].name
    if not d.has_context(name):
        raise InvalidTarget(f"no context {name!r}")
    return name


def _event(m, name: str):
    if not m.has_event(name):
        raise InvalidTarget(f"no event {name!r} in {m.name}")
    return m.event(name)


def _with_event(m, e):
    return replace(m, events=tuple(e if x.name == e.name else x for x in m.events))


def _action(label: str, text: str, reqs=()) -> Action:
    try:
        k, names, body = parse_action(text)
    except ParseError as exc:
        raise _Compile(f"syntax error in {text!r}: {exc}") from None
    kw = {"pred": body} if k == "becomesSuch" else {"expr": body}
    return Action(_label(label), k, names, requirements=tuple(reqs), **kw)


def edit(d: Development, r: AtomicRepair, target: str | None = None) -> tuple[Development, str]:
    """Apply a model-modifying repair; returns the new development and the new label."""
    p = r.params
    f = r.function_id
    reqs = tuple(p.get("requirements", ()))
    if f in ("addInvariant", "strengthenInvariant"):
        m = d.machine(_machine_name(d, p, target))
        labels = [i.label for i in m.invariants]
        if f == "addInvariant":
            if p["label"] in labels:
                raise InvalidTarget(f"invariant {p['label']} already exists")
            inv = m.invariants + (LabeledPred(_label(p["label"]), _pred(p["content"]), reqs),)
        else:
            if p["label"] not in labels:
                raise InvalidTarget(f"no invariant {p['label']} in {m.name}")
            inv = tuple(replace(i, pred=_pred(p["content"])) if i.label == p["label"] else i
                        for i in m.invariants)
        return d.replace_machine(replace(m, invariants=inv)), p["label"]
    if f in ("addGuard", "strengthenGuard"):
        m = d.machine(_machine_name(d, p, target))
        e = _event(m, p["event"])
        new = _pred(p["guard_content"])
        labels = [g.label for g in e.guards]
        if p["guard_label"] in labels:
            if f == "addGuard":
                raise InvalidTarget(f"guard {p['guard_label']} already exists")
            guards = tuple(replace(g, pred=conj([new, g.pred])) if g.label == p["guard_label"] else g
                           for g in e.guards)
        else:
            guards = e.guards + (LabeledPred(_label(p["guard_label"]), new, reqs),)
        return d.replace_machine(_with_event(m, replace(e, guards=guards))), p["guard_label"]
    if f in ("addAction", "updateAction"):
        m = d.machine(_machine_name(d, p, target))
        e = _event(m, p["event"])
        labels = [a.label for a in e.actions]
        lab = p["action_label"]
        if f == "addAction":
            if lab in labels:
                raise InvalidTarget(f"action {lab} already exists")
            acts = e.actions + (_action(lab, p["action"], reqs),)
        else:
            if lab not in labels:
                raise InvalidTarget(f"no action {lab} in {e.name}")
            acts = tuple(_action(lab, p["action"], a.requirements) if a.label == lab else a
                         for a in e.actions)
        return d.replace_machine(_with_event(m, replace(e, actions=acts))), lab
    if f in ("addAxiom", "addAxiomAndInjectHypothesis"):
        c = d.context(_context_name(d, p, target))
        if p["label"] in [a.label for a in c.axioms + c.theorems]:
            raise InvalidTarget(f"axiom {p['label']} already exists")
        ax = c.axioms + (LabeledPred(_label(p["label"]), _pred(p["content"]), reqs),)
        return d.replace_context(replace(c, axioms=ax)), p["label"]
    if f == "addTheorem":
        item = LabeledPred(_label(p["label"]), _pred(p["content"]))
        if "context" in p:
            c = d.context(_context_name(d, p, target))
            return d.replace_context(replace(c, theorems=c.theorems + (item,))), p["label"]
        m = d.machine(_machine_name(d, p, target))
        return d.replace_machine(replace(m, theorems=m.theorems + (item,))), p["label"]
    raise InvalidRepair(f"{f} is not a model edit")


class RejectedCompile(ValueError):
    """The edited development does not parse or is not well formed."""


def compile_edit(d: Development, r: AtomicRepair, target: str | None = None) -> tuple[Development, str]:
    """``edit`` followed by the well-formedness check."""
    try:
        new_d, label = edit(d, r, target)
    except (InvalidRepair, InvalidTarget):
        raise
    except (_Compile, KeyError, ValueError) as exc:
        raise RejectedCompile(str(exc)) from None
    errs = errors(well_formed(new_d))
    if errs:
        raise RejectedCompile("; ".join(f"{e.location}: {e.code} {e.message}" for e in errs[:5]))
    return new_d, label


def _affected_machines(d: Development, r: AtomicRepair, target: str | None) -> list[str]:
    if r.function_id in ("addAxiom", "addAxiomAndInjectHypothesis") or "context" in r.params:
        return [m.name for m in d.machines if m.sees]
    return [_machine_name(d, r.params, target)]


# -- acceptance ----------------------------------------------------------------------

def status_delta(before: ProofStore, after: ProofStore) -> dict:
    keys = sorted(set(before.status) | set(after.status))
    out = {}
    for k in keys:
        a, b = before.status.get(k), after.status.get(k)
        if a != b:
            out[k] = [a, b]
    return out


def guard_acceptance(before: ProofStore, after: ProofStore, target: str | None) -> str:
    """accepted when the target is discharged, noProgress when nothing changed, partial otherwise."""
    if target is not None and after.status.get(target) == "discharged":
        return "accepted"
    if before.summary() == after.summary():
        return "noProgress"
    return "partial"


def _record_outcome(verdict: str) -> str:
    # a step that moves statuses without discharging the target is logged as
    # noProgress; whether it survives is decided by the enclosing sequence
    return "noProgress" if verdict == "partial" else verdict


def _proof_step(store: ProofStore, r: AtomicRepair, target: str | None, ctx: RepairContext,
                tactic: Tactic) -> ProofStore:
    key = r.params.get("po", target)
    if key not in store:
        raise InvalidTarget(f"no obligation {key!r}")
    tree = store.tree(key)
    path = r.params.get("node_path")
    if path is None:
        first = tree.first_open()
        if first is None:
            raise InapplicableTactic(tactic.name, "proof is already closed")
        path = list(first[0])
    out = store.snapshot()
    new = apply_tactic(tree, path, tactic, ctx.budget)
    out.put(key, new, store.kinds.get(key, ""))
    return out


def _tactic_for(r: AtomicRepair) -> Tactic:
    p = r.params
    if r.function_id == "instantiateHypothesis":
        return Tactic("instantiate", (p["hyp_label"],) + tuple(p["terms"]))
    if r.function_id == "addLemma":
        return Tactic("cut", (p["lemma"],))
    if r.function_id == "unfoldDefinition":
        return Tactic("unfoldDef", (p["hyp_label"],))
    raise InvalidRepair(r.function_id)


def apply_repair(d: Development, store: ProofStore, r: AtomicRepair, target: str | None = None,
                 ctx: RepairContext | None = None, seq: int = 0):
    """Returns (development, store, record, verdict); rejected edits leave both inputs unchanged."""
    ctx = ctx or RepairContext()
    spec = validate(r)
    po = r.params.get("po", target) or ""
    if spec.kind == INFO:
        name = _machine_name(d, r.params, target)
        b = r.params.get("bounds")
        bounds = ctx.bounds if b is None else (Bounds.parse(b) if isinstance(b, str) else Bounds.from_json(b))
        res = explore(name, d, bounds)
        rec = RepairRecord(seq, po, r, "noProgress", observation=res.observation())
        return d, store, rec, "noProgress"
    if spec.kind == PROOF:
        try:
            new_store = _proof_step(store, r, target, ctx, _tactic_for(r))
        except InapplicableTactic as exc:
            rec = RepairRecord(seq, po, r, "noProgress", note=str(exc))
            return d, store, rec, "noProgress"
        verdict = guard_acceptance(store, new_store, po)
        rec = RepairRecord(seq, po, r, _record_outcome(verdict), status_delta(store, new_store),
                           introduced_label="cut" if r.function_id == "addLemma" else "")
        return d, new_store, rec, verdict
    try:
        new_d, label = compile_edit(d, r, target)
    except RejectedCompile as exc:
        return d, store, RepairRecord(seq, po, r, "rejectedCompile", note=str(exc)), "rejectedCompile"
    if ctx.mc_guard:
        for name in _affected_machines(new_d, r, target):
            if not satisfiable(new_d, name, ctx.bounds):
                return d, store, RepairRecord(seq, po, r, "rejectedMC",
                                              note=f"{name}: axioms and invariants are contradictory"), "rejectedMC"
            if ctx.mc_ok(d, name) and not ctx.mc_ok(new_d, name):
                res = explore(name, new_d, ctx.bounds)
                return d, store, RepairRecord(seq, po, r, "rejectedMC", note=f"{name}: {res.verdict}",
                                              observation=res.observation()), "rejectedMC"
    new_store = replay_all(new_d, store, development_pos(new_d), ctx.budget)
    if spec.kind == JOINT and po in new_store and new_store.status[po] != "discharged":
        try:
            new_store = _proof_step(new_store, AtomicRepair("addLemma", {"lemma": r.params["content"]}),
                                    po, ctx, Tactic("cut", (r.params["content"],)))
        except InapplicableTactic:
            pass
    verdict = guard_acceptance(store, new_store, po or None)
    rec = RepairRecord(seq, po, r, _record_outcome(verdict), status_delta(store, new_store),
                       introduced_label=label if spec.kind == JOINT or r.function_id == "addAxiom" else "")
    return new_d, new_store, rec, verdict


# -- sequences -----------------------------------------------------------------------

class RepairSession:
    """Holds the current development and store; runs repair sequences with rollback."""

    def __init__(self, d: Development, store: ProofStore, ctx: RepairContext | None = None):
        self.d = d
        self.store = store
        self.ctx = ctx or RepairContext()
        self.log: list[RepairRecord] = []
        self._snap = None
        self.target: str | None = None

    def begin(self, target: str) -> None:
        self.target = target
        self._snap = (serialize_json(self.d), self.store.dumps(), self.d, self.store.snapshot())

    def step(self, r: AtomicRepair) -> tuple[RepairRecord, str]:
        d, store, rec, verdict = apply_repair(self.d, self.store, r, self.target, self.ctx,
                                              seq=len(self.log) + 1)
        self.log.append(rec)
        if verdict not in ("rejectedCompile", "rejectedMC"):
            self.d, self.store = d, store
        return rec, verdict

    def commit(self) -> None:
        self._snap = None

    def rollback(self) -> None:
        if self._snap is None:
            return
        text, dump, d, store = self._snap
        self.d, self.store = d, store.snapshot()
        if serialize_json(self.d) != text or self.store.dumps() != dump:
            raise RuntimeError("rollback did not restore the snapshot")
        self._snap = None

    def changed_model(self) -> bool:
        return self._snap is not None and serialize_json(self.d) != self._snap[0]

    def write_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.log:
                fh.write(rec.dumps() + "\n")


def read_log(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


__all__ = ["AtomicRepair", "InvalidRepair", "InvalidTarget", "RejectedCompile", "compile_edit", "OUTCOMES", "REGISTRY", "RepairContext",
           "RepairRecord", "RepairSession", "apply_repair", "edit", "guard_acceptance", "read_log",
           "render", "status_delta", "validate"]
