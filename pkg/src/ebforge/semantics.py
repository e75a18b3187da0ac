"""Proof-obligation generation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ebforge.ast import (
    INIT, NAT, TRUTH, Action, Development, Event, Expr, Machine, Pred, SemType, conj, eq, free_vars,
    member, neg, prime, primed_map, substitute, var,
)
from ebforge.frontend.check import infer_types, well_formed
from ebforge.frontend.diagnostics import errors
from ebforge.frontend.formula import render

KINDS = ("WD", "INV", "FIS", "THM", "VAR", "GRD", "SIM", "EQL")


class UnknownMachine(KeyError):
    pass


class IllFormedDevelopment(ValueError):
    pass


# -- well-definedness -------------------------------------------------------

def _imp(a: Pred, b: Pred) -> Pred:
    if b.op == "truth":
        return TRUTH
    if a.op == "truth":
        return b
    return Pred("implies", (a, b))


def _wd_e(e: Expr) -> list[Pred]:
    out: list[Pred] = []
    for a in e.args:
        out.extend(_wd_e(a))
    op = e.op
    if op == "apply":
        out.append(member(e.args[1], Expr("dom", (e.args[0],))))
    elif op == "div":
        out.append(Pred("notEqual", (e.args[1], Expr("intLit", (), 0))))
    elif op in ("min", "max"):
        out.append(Pred("notEqual", (e.args[0], Expr("emptySet"))))
        out.append(Pred("finite", (e.args[0],)))
    elif op == "card":
        out.append(Pred("finite", (e.args[0],)))
    return out


def wd_condition(t) -> Pred:
    """Conditions under which every partial operator in ``t`` is defined."""
    if isinstance(t, Expr):
        return conj(_dedupe(_wd_e(t)))
    return _wd_p(t)


def _dedupe(ps: list[Pred]) -> list[Pred]:
    seen, out = set(), []
    for p in ps:
        if p not in seen:
            seen.add(p)
            out.append(p)
    return out


def _wd_p(p: Pred) -> Pred:
    op, a = p.op, p.args
    if op in ("truth", "falsity"):
        return TRUTH
    if op == "not":
        return _wd_p(a[0])
    if op == "and":
        parts, ctx = [], []
        for x in a:
            parts.append(_imp(conj(ctx), _wd_p(x)))
            ctx.append(x)
        return conj(parts)
    if op == "or":
        parts, ctx = [], []
        for x in a:
            parts.append(_imp(conj(neg(c) for c in ctx), _wd_p(x)))
            ctx.append(x)
        return conj(parts)
    if op == "implies":
        return conj([_wd_p(a[0]), _imp(a[0], _wd_p(a[1]))])
    if op == "iff":
        return conj([_wd_p(a[0]), _wd_p(a[1])])
    if op in ("forall", "exists"):
        body = _wd_p(a[0])
        if body.op == "truth":
            return TRUTH
        return Pred("forall", (body,), p.value)
    parts: list[Pred] = []
    for x in a:
        parts.extend(_wd_e(x))
    return conj(_dedupe(parts))


# -- obligations ------------------------------------------------------------

@dataclass(frozen=True)
class Sequent:
    hypotheses: tuple[tuple[str, Pred], ...]
    goal: Pred
    type_env: tuple[tuple[str, SemType], ...] = ()

    @property
    def hyps(self) -> list[Pred]:
        return [h for _, h in self.hypotheses]

    @property
    def types(self) -> dict[str, SemType]:
        return dict(self.type_env)

    def text(self) -> str:
        lines = [f"{lab}: {render(h)}" for lab, h in self.hypotheses]
        lines.append(f"|- {render(self.goal)}")
        return "\n".join(lines)


@dataclass(frozen=True)
class ProofObligation:
    name: str
    kind: str
    sequent: Sequent
    origin_labels: tuple[str, ...]
    machine: str
    refinement_po: bool = False
    gluing: bool = False

    @property
    def key(self) -> str:
        return f"{self.machine}:{self.name}"

    def to_json(self) -> dict:
        return {"name": self.name, "machine": self.machine, "kind": self.kind,
                "sequent": self.sequent.text(), "originLabels": list(self.origin_labels),
                "refinementPO": self.refinement_po, "gluing": self.gluing}

    def dump(self) -> str:
        return json.dumps(self.to_json())


def gluing_labels(d: Development, m: Machine) -> set[str]:
    """Invariants of a refining machine relating abstract and concrete-only variables."""
    if m.refines is None:
        return set()
    abstract: set[str] = set()
    for a in d.machine_chain(m.name)[:-1]:
        abstract.update(a.variables)
    concrete_only = set(m.variables) - abstract
    out = set()
    for inv in m.invariants:
        fv = free_vars(inv.pred)
        if fv & abstract and fv & concrete_only:
            out.add(inv.label)
    return out


@dataclass
class _Gen:
    d: Development
    m: Machine
    types: dict[str, SemType]
    params: dict[str, dict[str, SemType]]
    pos: list[ProofObligation] = field(default_factory=list)

    def env(self, t_names, event: str | None = None) -> tuple[tuple[str, SemType], ...]:
        env = dict(self.types)
        if event is not None:
            env.update(self.params.get(event, {}))
        return tuple(sorted((k, v) for k, v in env.items() if k in t_names))

    def emit(self, name, kind, hyps, goal, origin, event=None, refinement=False, gluing=False,
             machine=None):
        names: set[str] = set(free_vars(goal))
        for _, h in hyps:
            names |= free_vars(h)
        seq = Sequent(tuple(hyps), goal, self.env(names, event))
        self.pos.append(ProofObligation(name, kind, seq, tuple(origin), machine or self.m.name,
                                        refinement, gluing))


def _axiom_hyps(d: Development, contexts) -> list[tuple[str, Pred]]:
    out = []
    for c in contexts:
        for a in c.axioms:
            out.append((f"{c.name}/axioms/{a.label}", a.pred))
        for t in c.theorems:
            out.append((f"{c.name}/theorems/{t.label}", t.pred))
    return out


def _context_pos(d: Development, g: _Gen, contexts, emit_for) -> None:
    prior: list[tuple[str, Pred]] = []
    emit_for = {c.name for c in emit_for}
    for c in contexts:
        for kind, items in (("axioms", c.axioms), ("theorems", c.theorems)):
            for a in items:
                path = f"{c.name}/{kind}/{a.label}"
                wd = wd_condition(a.pred)
                if c.name not in emit_for:
                    pass
                elif wd.op != "truth":
                    g.emit(f"{a.label}/WD", "WD", list(prior), wd, [path], machine=c.name)
                if kind == "theorems" and c.name in emit_for:
                    g.emit(f"{a.label}/THM", "THM", list(prior), a.pred, [path], machine=c.name)
                prior.append((path, a.pred))


def _event_ba(e: Event, path: str) -> list[tuple[str, Pred]]:
    return [(f"{path}/actions/{a.label}", a.before_after()) for a in e.actions]


def _frame(variables, e: Event) -> list[tuple[str, Pred]]:
    assigned = set(e.assigned)
    return [(f"frame/{v}", eq(var(prime(v)), var(v))) for v in variables if v not in assigned]


def generate_pos(d: Development, name: str) -> list[ProofObligation]:
    """All proof obligations of machine (or context) ``name``, in generation order."""
    if d.has_context(name) and not d.has_machine(name):
        info = infer_types(d, name)
        g = _Gen(d, None, info.types, {})  # type: ignore[arg-type]
        chain = d.context_chain(name)
        _context_pos(d, g, chain, chain[-1:])
        return g.pos
    if not d.has_machine(name):
        raise UnknownMachine(name)
    bad = [x for x in errors(well_formed(d))]
    if bad:
        raise IllFormedDevelopment("; ".join(str(x) for x in bad[:3]))
    m = d.machine(name)
    info = infer_types(d, name)
    g = _Gen(d, m, info.types, info.params)
    chain = d.machine_chain(name)
    abs_m = chain[-2] if len(chain) > 1 else None
    seen = d.seen_contexts(name)
    old = d.seen_contexts(abs_m.name) if abs_m is not None else []
    _context_pos(d, g, seen, [c for c in seen if c not in old])
    ax = _axiom_hyps(d, seen)
    glue = gluing_labels(d, m)
    mpath = m.name

    abs_invs: list[tuple[str, Pred]] = []
    for a in chain[:-1]:
        for i in a.invariants:
            abs_invs.append((f"{a.name}/invariants/{i.label}", i.pred))
        for t in a.theorems:
            abs_invs.append((f"{a.name}/theorems/{t.label}", t.pred))
    abs_vars: list[str] = []
    for a in chain[:-1]:
        abs_vars.extend(v for v in a.variables if v not in abs_vars)
    vanished = [v for v in abs_vars if v not in m.variables]

    # invariants and theorems: WD, THM
    prior = list(ax) + list(abs_invs)
    for kind, items in (("invariants", m.invariants), ("theorems", m.theorems)):
        for i in items:
            path = f"{mpath}/{kind}/{i.label}"
            wd = wd_condition(i.pred)
            if wd.op != "truth":
                g.emit(f"{i.label}/WD", "WD", list(prior), wd, [path], gluing=i.label in glue)
            if kind == "theorems":
                g.emit(f"{i.label}/THM", "THM", list(prior), i.pred, [path])
            prior.append((path, i.pred))
    inv_hyps = list(prior)
    invariant_only = [(p, h) for p, h in inv_hyps]

    variant = m.variant
    if variant is not None:
        wd = wd_condition(variant)
        if wd.op != "truth":
            g.emit("variant/WD", "WD", list(inv_hyps), wd, [f"{mpath}/variants/0"])

    for e in m.events:
        epath = f"{mpath}/events/{e.name}"
        is_init = e.name == INIT
        base = list(ax) if is_init else list(invariant_only)
        # guard and action WD
        ghyps = list(base)
        for gd in e.guards:
            gpath = f"{epath}/guards/{gd.label}"
            wd = wd_condition(gd.pred)
            if wd.op != "truth":
                g.emit(f"{e.name}/{gd.label}/WD", "WD", list(ghyps), wd, [gpath, epath], event=e.name)
            ghyps.append((gpath, gd.pred))
        for a in e.actions:
            apath = f"{epath}/actions/{a.label}"
            wd = wd_condition(a.formulas()[0])
            if wd.op != "truth":
                g.emit(f"{e.name}/{a.label}/WD", "WD", list(ghyps), wd, [apath, epath], event=e.name)
            if a.kind != "assign":
                primed = [var(prime(v)) for v in a.variables]
                body = a.before_after()
                goal = Pred("exists", (body,), tuple(p.value for p in primed))
                g.emit(f"{e.name}/{a.label}/FIS", "FIS", list(ghyps), goal, [apath, epath], event=e.name)
        ba = _event_ba(e, epath)
        frame = [] if is_init else _frame(m.variables, e)
        # abstract event being refined
        abs_e = None
        if abs_m is not None:
            target = e.refines or (INIT if is_init else None)
            if target is not None:
                abs_e = abs_m.event(target)
        # effects on variables that vanish in this refinement
        vanish_hyps: list[tuple[str, Pred]] = []
        if vanished:
            if abs_e is not None:
                apath_e = f"{abs_m.name}/events/{abs_e.name}"
                for a in abs_e.actions:
                    if set(a.variables) & set(vanished):
                        vanish_hyps.append((f"{apath_e}/actions/{a.label}", a.before_after()))
                if not is_init:
                    vanish_hyps.extend((f"frame/{v}", eq(var(prime(v)), var(v)))
                                       for v in vanished if v not in abs_e.assigned)
            elif not is_init:
                vanish_hyps.extend((f"frame/{v}", eq(var(prime(v)), var(v))) for v in vanished)
        post = ghyps + ba + frame + vanish_hyps
        changed = set(e.assigned) | {v for v in vanished if abs_e is not None and v in abs_e.assigned}
        allvars = list(m.variables) + vanished
        sigma = primed_map(allvars)
        # INV
        for i in m.invariants:
            fv = free_vars(i.pred)
            if not is_init and not (fv & changed):
                continue
            goal = substitute(i.pred, sigma)
            ipath = f"{mpath}/invariants/{i.label}"
            gl = i.label in glue
            g.emit(f"{e.name}/{i.label}/INV", "INV", list(post), goal, [ipath, epath], event=e.name,
                   refinement=gl, gluing=gl)
        # VAR
        if variant is not None and not is_init:
            vp = substitute(variant, sigma)
            goal = conj([Pred("lt", (vp, variant)), member(variant, NAT)])
            g.emit(f"{e.name}/VAR", "VAR", list(post), goal, [f"{mpath}/variants/0", epath], event=e.name)
        # refinement obligations
        if abs_m is None:
            continue
        if abs_e is not None:
            apath_e = f"{abs_m.name}/events/{abs_e.name}"
            if not is_init:
                for gd in abs_e.guards:
                    g.emit(f"{e.name}/{gd.label}/GRD", "GRD", list(ghyps), gd.pred,
                           [f"{apath_e}/guards/{gd.label}", epath, apath_e], event=e.name,
                           refinement=True)
            concrete_bas = {a.before_after() for a in e.actions}
            for a in abs_e.actions:
                if a.before_after() in concrete_bas:
                    continue
                if set(a.variables) <= set(vanished):
                    continue
                g.emit(f"{e.name}/{a.label}/SIM", "SIM", list(post), a.before_after(),
                       [f"{apath_e}/actions/{a.label}", epath, apath_e], event=e.name, refinement=True)
            abs_assigned = set(abs_e.assigned)
        else:
            apath_e = None
            abs_assigned = set()
        for v in e.assigned:
            if v in abs_vars and v not in abs_assigned:
                goal = eq(var(prime(v)), var(v))
                origin = [epath] + ([apath_e] if apath_e else [])
                g.emit(f"{e.name}/{v}/EQL", "EQL", list(post), goal, origin, event=e.name,
                       refinement=True)
    names = [p.name for p in g.pos]
    assert len(names) == len(set(names)), "duplicate PO names"
    return g.pos


def gluing_proof_order(pos: list[ProofObligation]) -> list[ProofObligation]:
    """Gluing POs, then other refinement POs, then the rest; WD first within each group."""
    def group(p: ProofObligation) -> int:
        if p.gluing:
            return 0
        if p.refinement_po:
            return 1
        return 2

    return sorted(pos, key=lambda p: (group(p), p.kind != "WD", p.name))


def development_pos(d: Development) -> list[ProofObligation]:
    """POs of every machine in order; contexts not seen by any machine are included too."""
    out: list[ProofObligation] = []
    seen_ctx: set[str] = set()
    for m in d.machines:
        out.extend(generate_pos(d, m.name))
        seen_ctx.update(c.name for c in d.seen_contexts(m.name))
    for c in d.contexts:
        if c.name not in seen_ctx:
            out.extend(generate_pos(d, c.name))
    return out
