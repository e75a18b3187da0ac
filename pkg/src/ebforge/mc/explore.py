"""Bounded breadth-first exploration of machines."""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

from ebforge.ast import INIT, Context, Development, Event, Machine, Pred, conjuncts, free_vars, prime
from ebforge.frontend.check import infer_types
from ebforge.mc.values import (
    UNDEF, Bounds, CarrierElem, Evaluator, NonEnumerableDomain, enumerate_set, to_json, type_domain, vkey,
)


class CancelToken:
    def __init__(self):
        self.cancelled = False

    def cancel(self):
        self.cancelled = True


class Cancelled(RuntimeError):
    pass


@dataclass
class Step:
    event: str
    params: dict
    state: dict

    def to_json(self) -> dict:
        return {"event": self.event,
                "params": {k: to_json(v) for k, v in sorted(self.params.items())},
                "state": {k: to_json(v) for k, v in self.state.items()}}


@dataclass
class Trace:
    constants: dict
    steps: list[Step]

    def __len__(self):
        return len(self.steps)

    def to_json(self) -> dict:
        return {"constants": {k: to_json(v) for k, v in self.constants.items()},
                "steps": [s.to_json() for s in self.steps]}


@dataclass
class MCResult:
    verdict: str  # ok | invariantViolation | deadlock | axiomUnsat | boundExhausted
    trace: Trace | None = None
    violated: tuple[str, ...] = ()
    requirements: tuple[str, ...] = ()
    states: int = 0
    valuations: int = 0
    reachable_witness: bool = False

    @property
    def ok(self) -> bool:
        return self.verdict in ("ok", "boundExhausted")

    def to_json(self) -> dict:
        out = {"verdict": self.verdict, "statesExplored": self.states, "valuations": self.valuations,
               "violatedLabels": list(self.violated), "violatedRequirements": list(self.requirements)}
        out["trace"] = self.trace.to_json() if self.trace else None
        return out

    def observation(self) -> str:
        """Plain-text summary used as feedback for the proposer."""
        lines = [f"model checker verdict: {self.verdict} after {self.states} states"]
        if self.violated:
            lines.append("violated: " + ", ".join(self.violated))
        if self.trace:
            from ebforge.mc.values import show

            lines.append("constants: " + ", ".join(f"{k}={show(v)}" for k, v in self.trace.constants.items()))
            for s in self.trace.steps:
                ps = ", ".join(f"{k}={show(v)}" for k, v in sorted(s.params.items()))
                st = ", ".join(f"{k}={show(v)}" for k, v in s.state.items())
                lines.append(f"  {s.event}({ps}) -> {st}")
        return "\n".join(lines)


# -- constants --------------------------------------------------------------

def carriers_for(contexts: list[Context], b: Bounds) -> dict[str, frozenset]:
    out = {}
    for c in contexts:
        for s in c.sets:
            out[s] = frozenset(CarrierElem(s, k) for k in range(1, b.carrier_size + 1))
    return out


def _constant_order(contexts: list[Context]) -> list[tuple[str, object]]:
    """Constants ordered so that each typing axiom only mentions earlier names.

    Returns (constant, typing-set-expression or None) pairs.
    """
    sets = {s for c in contexts for s in c.sets}
    consts = sorted({k for c in contexts for k in c.constants})
    preds = [p for c in contexts for a in c.axioms for p in conjuncts(a.pred)]
    done: list[tuple[str, object]] = []
    known = set(sets)
    remaining = list(consts)
    while remaining:
        pick = None
        for k in remaining:
            for p in preds:
                if p.op in ("member", "equal") and p.args[0].op == "identRef" and p.args[0].value == k \
                        and free_vars(p.args[1]) <= known:
                    pick = (k, p)
                    break
            if pick:
                break
        if pick is None:
            pick = (remaining[0], None)
        done.append(pick)
        known.add(pick[0])
        remaining.remove(pick[0])
    return done


def solve_constants(contexts: list[Context], b: Bounds | None = None, d: Development | None = None,
                    scope: str | None = None, limit: int | None = None) -> list[dict]:
    """All constant valuations within bounds satisfying every axiom, in search order."""
    b = b or Bounds()
    carriers = carriers_for(contexts, b)
    order = _constant_order(contexts)
    types = {}
    if order and any(t is None for _, t in order):
        if d is None or scope is None:
            raise NonEnumerableDomain("untyped constants need the development for type inference")
        types = infer_types(d, scope).types
    ev = Evaluator(b, carriers, types)
    axioms = [a.pred for c in contexts for a in c.axioms]
    ax_vars = [free_vars(a) for a in axioms]
    base: dict = dict(carriers)
    names = [k for k, _ in order]
    # axioms become checkable once their last constant is assigned
    check_at: dict[int, list[Pred]] = {}
    for a, fv in zip(axioms, ax_vars):
        idx = max([names.index(x) for x in fv if x in names], default=-1)
        check_at.setdefault(idx, []).append(a)
    for a in check_at.get(-1, []):
        if ev.holds(a, base) is not True:
            return []
    out: list[dict] = []

    def rec(i: int, env: dict):
        if limit is not None and len(out) >= limit:
            return
        if i == len(order):
            out.append({k: env[k] for k in names})
            return
        k, typing = order[i]
        if typing is None:
            if k not in types:
                raise NonEnumerableDomain(f"no type for constant {k}")
            dom = type_domain(types[k], b, carriers)
        elif typing.op == "equal":
            v = ev.ev(typing.args[1], env)
            dom = [] if v is UNDEF else [v]
        else:
            s = ev.ev(typing.args[1], env)
            dom = [] if s is UNDEF else enumerate_set(s, b)
        for v in dom:
            env[k] = v
            if all(ev.holds(a, env) is True for a in check_at.get(i, [])):
                rec(i + 1, env)
            del env[k]

    rec(0, base)
    return out


# -- transitions ------------------------------------------------------------

class _Runner:
    def __init__(self, d: Development, m: Machine, b: Bounds):
        self.d, self.m, self.b = d, m, b
        self.contexts = d.seen_contexts(m.name)
        self.carriers = carriers_for(self.contexts, b)
        info = infer_types(d, m.name)
        self.types = info.types
        self.ptypes = info.params
        self.ev = Evaluator(b, self.carriers, self.types)
        chain = d.machine_chain(m.name)
        self.abs_m = chain[-2] if len(chain) > 1 else None
        self.vanished = [v for v in (self.abs_m.variables if self.abs_m else ()) if v not in m.variables]
        self.state_vars = list(m.variables) + self.vanished
        invs = [(i.label, i.pred, i.requirements) for i in m.invariants]
        if self.abs_m is not None:
            avail = set(self.state_vars) | {k for c in self.contexts for k in c.constants + c.sets}
            for i in self.abs_m.invariants:
                if free_vars(i.pred) <= avail:
                    invs.append((f"{self.abs_m.name}/{i.label}", i.pred, i.requirements))
        self.invs = invs

    def param_choices(self, e: Event, env: dict, machine: Machine) -> list[dict]:
        if not e.parameters:
            return [{}]
        guards = [p for g in e.guards for p in conjuncts(g.pred)]
        ptypes = self.ptypes.get(e.name, {}) if machine is self.m else \
            infer_types(self.d, machine.name).params.get(e.name, {})
        out: list[dict] = []

        def rec(i: int, cur: dict):
            if i == len(e.parameters):
                out.append(dict(cur))
                return
            p = e.parameters[i]
            later = set(e.parameters[i:])
            dom = None
            for g in guards:
                if g.op == "member" and g.args[0].op == "identRef" and g.args[0].value == p \
                        and not (free_vars(g.args[1]) & later):
                    s = self.ev.ev(g.args[1], {**env, **cur})
                    if s is not UNDEF:
                        dom = enumerate_set(s, self.b)
                        break
            if dom is None:
                if p not in ptypes:
                    raise NonEnumerableDomain(f"no domain for parameter {p}")
                dom = type_domain(ptypes[p], self.b, self.carriers)
            for v in dom:
                cur[p] = v
                rec(i + 1, cur)
            cur.pop(p, None)

        rec(0, {})
        return out

    def action_options(self, e: Event, env: dict, variables, fixed: dict | None = None) -> list[dict] | None:
        """Post-values for the variables assigned by ``e``; ``fixed`` pins some post-values."""
        per_action: list[list[dict]] = []
        fixed = fixed or {}
        for a in e.actions:
            vs = a.variables
            if all(v in fixed for v in vs):
                penv = dict(env)
                penv.update({prime(v): fixed[v] for v in vs})
                if self.ev.holds(a.before_after(), penv) is not True:
                    return None
                continue
            if a.kind == "assign":
                val = self.ev.ev(a.expr, env)
                if val is UNDEF:
                    return None
                per_action.append([{vs[0]: val}])
            elif a.kind == "becomesIn":
                s = self.ev.ev(a.expr, env)
                if s is UNDEF:
                    return None
                per_action.append([{vs[0]: x} for x in enumerate_set(s, self.b)])
            else:
                free = [v for v in vs if v not in fixed]
                doms = [type_domain(self.types[v], self.b, self.carriers) for v in free]
                opts = []
                for combo in itertools.product(*doms):
                    penv = dict(env)
                    penv.update({prime(v): fixed[v] for v in vs if v in fixed})
                    penv.update({prime(v): x for v, x in zip(free, combo)})
                    if self.ev.holds(a.pred, penv) is True:
                        opts.append(dict(zip(free, combo)))
                per_action.append(opts)
        out = []
        for combo in itertools.product(*per_action):
            post: dict = {}
            for part in combo:
                post.update(part)
            out.append(post)
        return out

    def successors(self, e: Event, consts: dict, state: dict | None):
        """(params, post-state) pairs of concrete event ``e`` from ``state`` (None before INIT)."""
        env = dict(consts)
        if state is not None:
            env.update(state)
        out = []
        for params in self.param_choices(e, env, self.m):
            penv = {**env, **params}
            if not all(self.ev.holds(g.pred, penv) is True for g in e.guards):
                continue
            opts = self.action_options(e, penv, self.m.variables)
            if not opts:
                continue
            for post in opts:
                full = {}
                for v in self.m.variables:
                    if v in post:
                        full[v] = post[v]
                    elif state is not None:
                        full[v] = state[v]
                if state is None and len(full) < len(self.m.variables):
                    missing = [v for v in self.m.variables if v not in full]
                    doms = [type_domain(self.types[v], self.b, self.carriers) for v in missing]
                    for combo in itertools.product(*doms):
                        out.append((params, {**full, **dict(zip(missing, combo))}))
                else:
                    out.append((params, full))
        return out

    def abstract_step(self, e: Event, consts: dict, state: dict | None, params: dict, post: dict):
        """Extend a concrete step to the product; returns (list of vanished post-values, failure label)."""
        if self.abs_m is None:
            return [{}], None
        is_init = e.name == INIT
        target = e.refines or (INIT if is_init else None)
        abs_vars = self.abs_m.variables
        if target is None:
            for v in abs_vars:
                if v in self.m.variables and state is not None and post[v] != state[v]:
                    return [], f"{e.name}/EQL"
            return [{v: state[v] for v in self.vanished}], None
        ae = self.abs_m.event(target)
        env = dict(consts)
        if state is not None:
            env.update(state)
        env.update({p: params[p] for p in ae.parameters if p in params})
        if not is_init and not all(self.ev.holds(g.pred, env) is True for g in ae.guards):
            return [], f"{e.name}/GRD"
        fixed = {v: post[v] for v in abs_vars if v in self.m.variables}
        opts = self.action_options(ae, env, abs_vars, fixed)
        if opts is None:
            return [], f"{e.name}/SIM"
        # retained abstract variables the abstract event leaves alone must not move
        assigned = set(ae.assigned)
        if state is not None:
            for v in fixed:
                if v not in assigned and post[v] != state[v]:
                    return [], f"{e.name}/SIM"
        results = []
        for o in opts:
            van = {}
            for v in self.vanished:
                if v in o:
                    van[v] = o[v]
                elif state is not None:
                    van[v] = state[v]
                else:
                    van[v] = None
            results.append(van)
        if any(None in r.values() for r in results):
            expanded = []
            for r in results:
                missing = [v for v, x in r.items() if x is None]
                doms = [type_domain(self.types[v], self.b, self.carriers) for v in missing]
                for combo in itertools.product(*doms):
                    expanded.append({**r, **dict(zip(missing, combo))})
            results = expanded
        if not results:
            return [], f"{e.name}/SIM"
        return results, None

    def product_successors(self, e: Event, consts: dict, state: dict | None):
        out = []
        for params, post in self.successors(e, consts, state):
            vans, fail = self.abstract_step(e, consts, state, params, post)
            if fail is not None:
                out.append((params, post, fail))
                continue
            for van in vans:
                out.append((params, {**post, **van}, None))
        return out

    def violated(self, consts: dict, state: dict) -> list[tuple[str, tuple[str, ...]]]:
        env = {**consts, **state}
        bad = []
        for label, pred, reqs in self.invs:
            if self.ev.holds(pred, env) is not True:
                bad.append((label, reqs))
        return bad


def _key(state: dict, names: list[str]) -> tuple:
    return tuple(state[v] for v in names)


def explore(m: Machine | str, d: Development, b: Bounds | None = None, *, constants: list[dict] | None = None,
            check_deadlock: bool = False, cancel: CancelToken | None = None) -> MCResult:
    """Breadth-first search for invariant violations, per constant valuation."""
    b = b or Bounds()
    if isinstance(m, str):
        m = d.machine(m)
    run = _Runner(d, m, b)
    if constants is None:
        constants = solve_constants(run.contexts, b, d, m.name)
    if not constants:
        return MCResult("axiomUnsat")
    total = 0
    exhausted = False
    for cv in constants:
        consts = {**run.carriers, **cv}
        res = _explore_one(run, consts, cv, b, check_deadlock, cancel)
        total += res.states
        if res.verdict in ("invariantViolation", "deadlock"):
            res.states = total
            res.valuations = len(constants)
            if not replay_trace(res.trace, m, d, b, product=res.violated and "/" in res.violated[0]
                                and res.violated[0].split("/")[-1] in ("GRD", "SIM", "EQL")):
                raise RuntimeError("counterexample failed to replay")
            return res
        exhausted = exhausted or res.verdict == "boundExhausted"
    return MCResult("boundExhausted" if exhausted else "ok", states=total, valuations=len(constants),
                    reachable_witness=total > 0)


def _explore_one(run: _Runner, consts: dict, cv: dict, b: Bounds, check_deadlock: bool,
                 cancel: CancelToken | None) -> MCResult:
    names = run.state_vars
    nodes: list[tuple[int, str, dict, dict]] = []  # parent, event, params, state
    seen: dict[tuple, int] = {}

    def trace_to(idx: int) -> Trace:
        steps = []
        while idx >= 0:
            parent, ev, params, st = nodes[idx]
            steps.append(Step(ev, params, {v: st[v] for v in names}))
            idx = parent
        return Trace(dict(cv), steps[::-1])

    def fail(idx: int, labels, reqs=()) -> MCResult:
        return MCResult("invariantViolation", trace_to(idx), tuple(labels), tuple(reqs), states=len(nodes))

    init = run.m.event(INIT)
    queue: deque[tuple[int, int]] = deque()
    for params, post, err in sorted(run.product_successors(init, consts, None),
                                    key=lambda t: tuple(vkey(t[1][v]) for v in names)):
        k = _key(post, names)
        if k in seen:
            continue
        nodes.append((-1, INIT, params, post))
        idx = len(nodes) - 1
        seen[k] = idx
        if err:
            return fail(idx, [err])
        bad = run.violated(consts, post)
        if bad:
            return fail(idx, [x for x, _ in bad], [r for _, rs in bad for r in rs])
        queue.append((idx, 0))
    events = [e for e in run.m.events if e.name != INIT]
    while queue:
        if cancel is not None and cancel.cancelled:
            raise Cancelled("exploration cancelled")
        idx, depth = queue.popleft()
        if depth >= b.depth:
            continue
        state = nodes[idx][3]
        enabled = False
        for e in events:
            succ = run.product_successors(e, consts, state)
            if succ:
                enabled = True
            for params, post, err in succ:
                k = _key(post, names)
                if err:
                    nodes.append((idx, e.name, params, post))
                    return fail(len(nodes) - 1, [err])
                if k in seen:
                    continue
                if len(nodes) >= b.max_states:
                    return MCResult("boundExhausted", states=len(nodes))
                nodes.append((idx, e.name, params, post))
                nidx = len(nodes) - 1
                seen[k] = nidx
                bad = run.violated(consts, post)
                if bad:
                    return fail(nidx, [x for x, _ in bad], [r for _, rs in bad for r in rs])
                queue.append((nidx, depth + 1))
        if check_deadlock and not enabled:
            return MCResult("deadlock", trace_to(idx), states=len(nodes))
    return MCResult("ok", states=len(nodes))


def replay_trace(trace: Trace, m: Machine | str, d: Development, b: Bounds | None = None,
                 product: bool = False) -> bool:
    """Check every step of ``trace`` against the guards and before-after predicates."""
    b = b or Bounds()
    if isinstance(m, str):
        m = d.machine(m)
    run = _Runner(d, m, b)
    consts = {**run.carriers, **trace.constants}
    prev = None
    for k, step in enumerate(trace.steps):
        if (k == 0) != (step.event == INIT):
            return False
        e = m.event(step.event)
        last = k == len(trace.steps) - 1
        cands = run.product_successors(e, consts, prev)
        ok = False
        for params, post, err in cands:
            if params == step.params and all(post[v] == step.state[v] for v in m.variables):
                if err is None or (product and last):
                    if err is None and any(post[v] != step.state[v] for v in run.vanished):
                        continue
                    ok = True
                    break
        if not ok:
            return False
        prev = step.state
    return True


def satisfiable(d: Development, m: Machine | str, b: Bounds | None = None) -> bool:
    """Whether axioms and invariants have a common model within bounds."""
    b = b or Bounds()
    if isinstance(m, str):
        m = d.machine(m)
    run = _Runner(d, m, b)
    names = run.state_vars
    invs = [p for _, p, _ in run.invs]
    order = {v: i for i, v in enumerate(names)}
    check_at: dict[int, list] = {}
    for p in invs:
        idx = max([order[x] for x in free_vars(p) if x in order], default=-1)
        check_at.setdefault(idx, []).append(p)
    for cv in solve_constants(run.contexts, b, d, m.name):
        env = {**run.carriers, **cv}
        if not all(run.ev.holds(p, env) is True for p in check_at.get(-1, [])):
            continue

        def rec(i: int) -> bool:
            if i == len(names):
                return True
            for v in type_domain(run.types[names[i]], b, run.carriers):
                env[names[i]] = v
                if all(run.ev.holds(p, env) is True for p in check_at.get(i, [])) and rec(i + 1):
                    return True
            env.pop(names[i], None)
            return False

        if rec(0):
            return True
    return False
