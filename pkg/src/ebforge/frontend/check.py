"""Well-formedness: scoping rules and monomorphic type inference."""
from __future__ import annotations

from dataclasses import dataclass, field

from ebforge.ast import (
    BOOL_T, INIT, INT_T, Context, Development, Event, Expr, Machine, Pred, SemType, Term,
    carrier_t, free_vars, is_primed, pair_t, pow_t, prime, unprime,
)
from ebforge.frontend.diagnostics import Diagnostic


class TVar:
    __slots__ = ("id",)
    _next = 0

    def __init__(self):
        TVar._next += 1
        self.id = TVar._next

    def __repr__(self):
        return f"?{self.id}"


class TypeClash(Exception):
    pass


class Unifier:
    def __init__(self):
        self.bind: dict[int, object] = {}

    def find(self, t):
        while isinstance(t, TVar) and t.id in self.bind:
            t = self.bind[t.id]
        return t

    def resolve(self, t):
        t = self.find(t)
        if isinstance(t, tuple):
            return (t[0],) + tuple(self.resolve(a) if not isinstance(a, str) else a for a in t[1:])
        return t

    def occurs(self, v: TVar, t) -> bool:
        t = self.find(t)
        if isinstance(t, TVar):
            return t.id == v.id
        if isinstance(t, tuple):
            return any(self.occurs(v, a) for a in t[1:] if not isinstance(a, str))
        return False

    def unify(self, a, b):
        a, b = self.find(a), self.find(b)
        if isinstance(a, TVar):
            if isinstance(b, TVar) and a.id == b.id:
                return
            if self.occurs(a, b):
                raise TypeClash(f"cyclic type {self.show(b)}")
            self.bind[a.id] = b
            return
        if isinstance(b, TVar):
            self.unify(b, a)
            return
        if a[0] != b[0] or len(a) != len(b):
            raise TypeClash(f"{self.show(a)} vs {self.show(b)}")
        if a[0] == "Carrier":
            if a[1] != b[1]:
                raise TypeClash(f"{a[1]} vs {b[1]}")
            return
        for x, y in zip(a[1:], b[1:]):
            self.unify(x, y)

    def show(self, t) -> str:
        t = self.resolve(t)
        if isinstance(t, TVar):
            return "?"
        if t[0] in ("INT", "BOOL"):
            return t[0]
        if t[0] == "Carrier":
            return t[1]
        if t[0] == "Pow":
            return f"Pow({self.show(t[1])})"
        return f"Pair({self.show(t[1])}, {self.show(t[2])})"

    def to_semtype(self, t) -> SemType | None:
        t = self.resolve(t)
        if isinstance(t, TVar):
            return None
        if t[0] == "INT":
            return INT_T
        if t[0] == "BOOL":
            return BOOL_T
        if t[0] == "Carrier":
            return carrier_t(t[1])
        parts = [self.to_semtype(a) for a in t[1:]]
        if any(p is None for p in parts):
            return None
        return pow_t(parts[0]) if t[0] == "Pow" else pair_t(parts[0], parts[1])


INT = ("INT",)
BOOL = ("BOOL",)


def POW(t):
    return ("Pow", t)


def PAIR(a, b):
    return ("Pair", a, b)


def from_semtype(t: SemType):
    if t.kind == "INT":
        return INT
    if t.kind == "BOOL":
        return BOOL
    if t.kind == "Carrier":
        return ("Carrier", t.name)
    if t.kind == "Pow":
        return POW(from_semtype(t.args[0]))
    return PAIR(from_semtype(t.args[0]), from_semtype(t.args[1]))


class Inference:
    """Collects typing constraints for formulas against a shared environment."""

    def __init__(self, sets=()):
        self.u = Unifier()
        self.env: dict[str, object] = {}
        self.sets = set(sets)
        self.binders: dict[tuple[Pred, str], object] = {}

    def ident(self, name: str):
        if name in self.sets:
            return POW(("Carrier", name))
        if name not in self.env:
            self.env[name] = TVar()
        return self.env[name]

    def expr(self, e: Expr, local: dict):
        op, a = e.op, e.args
        u = self.u
        if op == "intLit":
            return INT
        if op == "boolLit":
            return BOOL
        if op == "identRef":
            if e.value in local:
                return local[e.value]
            return self.ident(e.value)
        if op in ("add", "sub", "mul", "div"):
            u.unify(self.expr(a[0], local), INT)
            u.unify(self.expr(a[1], local), INT)
            return INT
        if op == "minus":
            u.unify(self.expr(a[0], local), INT)
            return INT
        if op == "setLit":
            t = TVar()
            for x in a:
                u.unify(self.expr(x, local), t)
            return POW(t)
        if op == "emptySet":
            return POW(TVar())
        if op == "range":
            u.unify(self.expr(a[0], local), INT)
            u.unify(self.expr(a[1], local), INT)
            return POW(INT)
        if op in ("dom", "ran"):
            x, y = TVar(), TVar()
            u.unify(self.expr(a[0], local), POW(PAIR(x, y)))
            return POW(x if op == "dom" else y)
        if op == "image":
            x, y = TVar(), TVar()
            u.unify(self.expr(a[0], local), POW(PAIR(x, y)))
            u.unify(self.expr(a[1], local), POW(x))
            return POW(y)
        if op == "apply":
            x, y = TVar(), TVar()
            u.unify(self.expr(a[0], local), POW(PAIR(x, y)))
            u.unify(self.expr(a[1], local), x)
            return y
        if op in ("min", "max"):
            u.unify(self.expr(a[0], local), POW(INT))
            return INT
        if op == "card":
            u.unify(self.expr(a[0], local), POW(TVar()))
            return INT
        if op in ("union", "inter", "setminus"):
            t = POW(TVar())
            u.unify(self.expr(a[0], local), t)
            u.unify(self.expr(a[1], local), t)
            return t
        if op == "pairMaplet":
            return PAIR(self.expr(a[0], local), self.expr(a[1], local))
        if op in ("totalFun", "partialFun"):
            x, y = TVar(), TVar()
            u.unify(self.expr(a[0], local), POW(x))
            u.unify(self.expr(a[1], local), POW(y))
            return POW(POW(PAIR(x, y)))
        if op in ("naturals", "integers"):
            return POW(INT)
        if op == "bools":
            return POW(BOOL)
        raise TypeClash(f"unknown operator {op}")

    def pred(self, p: Pred, local: dict | None = None):
        local = local or {}
        op, a = p.op, p.args
        u = self.u
        if op in ("truth", "falsity"):
            return
        if op in ("not", "and", "or", "implies", "iff"):
            for x in a:
                self.pred(x, local)
            return
        if op in ("equal", "notEqual"):
            u.unify(self.expr(a[0], local), self.expr(a[1], local))
            return
        if op in ("lt", "leq", "gt", "geq"):
            u.unify(self.expr(a[0], local), INT)
            u.unify(self.expr(a[1], local), INT)
            return
        if op in ("member", "notMember"):
            u.unify(POW(self.expr(a[0], local)), self.expr(a[1], local))
            return
        if op == "subset":
            t = POW(TVar())
            u.unify(self.expr(a[0], local), t)
            u.unify(self.expr(a[1], local), t)
            return
        if op == "finite":
            u.unify(self.expr(a[0], local), POW(TVar()))
            return
        if op in ("forall", "exists"):
            inner = dict(local)
            for b in p.value:
                inner[b] = TVar()
                self.binders[(p, b)] = inner[b]
            self.pred(a[0], inner)
            return
        raise TypeClash(f"unknown operator {op}")

    def types(self) -> dict[str, SemType]:
        out = {}
        for k, v in self.env.items():
            t = self.u.to_semtype(v)
            if t is not None:
                out[k] = t
        for s in self.sets:
            out[s] = pow_t(carrier_t(s))
        return out

    def binder_types(self) -> dict[tuple[Pred, str], SemType]:
        return {k: t for k, v in self.binders.items() if (t := self.u.to_semtype(v)) is not None}


def term_types(t: Term, env: dict[str, SemType]) -> tuple[dict[str, SemType], dict]:
    """Infer types of a standalone formula given known identifier types."""
    inf = Inference(sets=[k for k, v in env.items() if v.kind == "Pow" and v.args[0].kind == "Carrier"
                          and v.args[0].name == k])
    for k, v in env.items():
        if k not in inf.sets:
            inf.env[k] = from_semtype(v)
    if isinstance(t, Pred):
        inf.pred(t)
    else:
        inf.expr(t, {})
    return inf.types(), inf.binder_types()


# -- scoping ----------------------------------------------------------------

@dataclass
class Scope:
    path: str
    allowed: set[str]
    note: str = ""


@dataclass
class TypeInfo:
    types: dict[str, SemType] = field(default_factory=dict)
    params: dict[str, dict[str, SemType]] = field(default_factory=dict)
    binders: dict = field(default_factory=dict)


def _context_names(cs: list[Context]) -> tuple[list[str], list[str]]:
    sets, consts = [], []
    for c in cs:
        sets.extend(c.sets)
        consts.extend(c.constants)
    return sets, consts


def _declared_names(d: Development) -> set[str]:
    names: set[str] = set()
    for c in d.contexts:
        names.update(c.sets)
        names.update(c.constants)
    for m in d.machines:
        names.update(m.variables)
        names.update(prime(v) for v in m.variables)
        for e in m.events:
            names.update(e.parameters)
    return names


class Checker:
    def __init__(self, d: Development):
        self.d = d
        self.diags: set[Diagnostic] = set()
        self.declared = _declared_names(d)

    def add(self, path: str, code: str, message: str, **hint):
        self.diags.add(Diagnostic(path, code, message, hint=hint))

    def scope_check(self, t: Term, path: str, allowed: set[str], why: str = ""):
        for name in sorted(free_vars(t)):
            if name in allowed:
                continue
            if name in self.declared or (is_primed(name) and unprime(name) in self.declared):
                self.add(path, "SCOPE_VIOLATION", f"{name} is not in scope here{why}", identifier=name)
            else:
                self.add(path, "UNDECLARED_IDENT", f"{name} is not declared", identifier=name)
        for node in t.walk():
            if node.op in ("forall", "exists"):
                if len(set(node.value)) != len(node.value):
                    self.add(path, "DUPLICATE_IDENT", "duplicate quantifier binder")

    # -- links --
    def links(self):
        d = self.d
        names = [c.name for c in d.contexts] + [m.name for m in d.machines]
        for n in sorted({n for n in names if names.count(n) > 1}):
            self.add(n, "DUPLICATE_IDENT", f"component name {n} used twice")
        for c in d.contexts:
            if c.extends is not None and not d.has_context(c.extends):
                self.add(c.name, "UNKNOWN_LINK", f"extended context {c.extends} does not exist")
            seen, cur = set(), c.name
            while cur is not None and d.has_context(cur):
                if cur in seen:
                    self.add(c.name, "CYCLIC_LINK", "extends chain is cyclic")
                    break
                seen.add(cur)
                cur = d.context(cur).extends
        order = {m.name: i for i, m in enumerate(d.machines)}
        for m in d.machines:
            if m.sees is not None and not d.has_context(m.sees):
                self.add(m.name, "UNKNOWN_LINK", f"seen context {m.sees} does not exist")
            if m.refines is not None:
                if not d.has_machine(m.refines):
                    self.add(m.name, "UNKNOWN_LINK", f"refined machine {m.refines} does not exist")
                elif order[m.refines] >= order[m.name]:
                    self.add(m.name, "LINK_ORDER", f"{m.refines} must precede {m.name}")
            seen, cur = set(), m.name
            while cur is not None and d.has_machine(cur):
                if cur in seen:
                    self.add(m.name, "CYCLIC_LINK", "refines chain is cyclic")
                    break
                seen.add(cur)
                cur = d.machine(cur).refines

    def labels(self, path: str, labels: list[str]):
        for lab in sorted({x for x in labels if labels.count(x) > 1}):
            self.add(path, "DUPLICATE_LABEL", f"label {lab} used more than once", label=lab)

    # -- contexts --
    def context(self, c: Context):
        chain = self.d.context_chain(c.name)
        sets, consts = _context_names(chain)
        allnames = sets + consts
        for n in sorted({x for x in allnames if allnames.count(x) > 1}):
            self.add(c.name, "DUPLICATE_IDENT", f"{n} declared more than once")
        self.labels(c.name, [a.label for a in c.axioms + c.theorems])
        allowed = set(allnames)
        for kind, items in (("axioms", c.axioms), ("theorems", c.theorems)):
            for a in items:
                self.scope_check(a.pred, f"{c.name}/{kind}/{a.label}", allowed)

    # -- machines --
    def machine(self, m: Machine):
        d = self.d
        ctxs = d.seen_contexts(m.name)
        sets, consts = _context_names(ctxs)
        ctx_names = set(sets + consts)
        abstract = [x for x in d.machine_chain(m.name) if x.name != m.name]
        abs_vars = set()
        for a in abstract:
            abs_vars.update(a.variables)
        own = list(m.variables)
        for n in sorted({v for v in own if own.count(v) > 1}):
            self.add(m.name, "DUPLICATE_IDENT", f"variable {n} declared twice")
        for v in own:
            if v in ctx_names:
                self.add(m.name, "DUPLICATE_IDENT", f"variable {v} clashes with a set or constant")
        self.labels(m.name, [i.label for i in m.invariants + m.theorems])
        inv_scope = ctx_names | set(own) | abs_vars
        for kind, items in (("invariants", m.invariants), ("theorems", m.theorems)):
            for i in items:
                self.scope_check(i.pred, f"{m.name}/{kind}/{i.label}", inv_scope)
        if len(m.variants) > 1:
            self.add(m.name, "MULTIPLE_VARIANTS", "at most one variant is allowed")
        for k, v in enumerate(m.variants):
            self.scope_check(v, f"{m.name}/variants/{k}", ctx_names | set(own))
        names = [e.name for e in m.events]
        self.labels(m.name, names)
        inits = [e for e in m.events if e.name == INIT]
        if not inits:
            self.add(m.name, "MISSING_INIT", "machine has no INITIALISATION event")
        abs_m = d.machine(m.refines) if m.refines and d.has_machine(m.refines) else None
        for e in m.events:
            self.event(m, e, ctx_names, set(own), abs_m)

    def event(self, m: Machine, e: Event, ctx_names: set[str], own: set[str], abs_m: Machine | None):
        path = f"{m.name}/events/{e.name}"
        is_init = e.name == INIT
        if is_init and (e.parameters or e.guards):
            self.add(path, "INIT_MALFORMED", "INITIALISATION takes no parameters or guards")
        self.labels(path, [g.label for g in e.guards] + [a.label for a in e.actions])
        params = list(e.parameters)
        for p in sorted({x for x in params if params.count(x) > 1}):
            self.add(path, "DUPLICATE_IDENT", f"parameter {p} declared twice")
        for p in params:
            if p in ctx_names or p in own:
                self.add(path, "DUPLICATE_IDENT", f"parameter {p} clashes with another identifier")
        base = ctx_names | set(params) | (set() if is_init else own)
        for g in e.guards:
            self.scope_check(g.pred, f"{path}/guards/{g.label}", base)
        assigned: list[str] = []
        for a in e.actions:
            apath = f"{path}/actions/{a.label}"
            for v in a.variables:
                if v not in own:
                    self.add(apath, "NOT_ASSIGNABLE", f"{v} is not a variable of {m.name}", identifier=v)
                if v in assigned:
                    self.add(apath, "CONFLICTING_ASSIGNMENT", f"{v} is assigned twice", identifier=v)
                assigned.append(v)
            if a.kind == "becomesSuch":
                self.scope_check(a.pred, apath, base | {prime(v) for v in a.variables})
            else:
                self.scope_check(a.expr, apath, base)
        # refinement links
        if abs_m is not None:
            target = e.refines or (INIT if is_init else None)
            if target is not None:
                if not abs_m.has_event(target):
                    self.add(path, "UNKNOWN_ABSTRACT_EVENT", f"{abs_m.name} has no event {target}")
                else:
                    for p in abs_m.event(target).parameters:
                        if p not in e.parameters:
                            self.add(path, "DROPPED_PARAMETER", f"abstract parameter {p} must be kept")
        elif e.refines is not None:
            self.add(path, "UNKNOWN_ABSTRACT_EVENT", f"{m.name} refines no machine")

    # -- typing --
    def typecheck(self, scope_name: str) -> TypeInfo:
        d = self.d
        is_machine = d.has_machine(scope_name)
        ctxs = d.seen_contexts(scope_name) if is_machine else d.context_chain(scope_name)
        sets, _ = _context_names(ctxs)
        inf = Inference(sets)
        formulas: list[tuple[str, Term, dict | None]] = []
        for c in ctxs:
            for kind, items in (("axioms", c.axioms), ("theorems", c.theorems)):
                for a in items:
                    formulas.append((f"{c.name}/{kind}/{a.label}", a.pred, None))
        event_locals: dict[str, dict] = {}
        if is_machine:
            for m in d.machine_chain(scope_name):
                for kind, items in (("invariants", m.invariants), ("theorems", m.theorems)):
                    for i in items:
                        formulas.append((f"{m.name}/{kind}/{i.label}", i.pred, None))
                for k, v in enumerate(m.variants):
                    formulas.append((f"{m.name}/variants/{k}", v, None))
                for e in m.events:
                    local = {p: TVar() for p in e.parameters}
                    if m.name == scope_name:
                        event_locals[e.name] = local
                    path = f"{m.name}/events/{e.name}"
                    for g in e.guards:
                        formulas.append((f"{path}/guards/{g.label}", g.pred, local))
                    for a in e.actions:
                        formulas.append((f"{path}/actions/{a.label}", a, local))
        for path, f, local in formulas:
            try:
                self._type_formula(inf, f, local or {})
            except TypeClash as exc:
                self.add(path, "TYPE_MISMATCH", str(exc))
        info = TypeInfo(inf.types(), binders=inf.binder_types())
        names: list[str] = []
        for c in ctxs:
            names.extend(c.constants)
        if is_machine:
            for m in d.machine_chain(scope_name):
                names.extend(m.variables)
        for n in names:
            if n not in info.types and n in inf.env:
                self.add(scope_name, "TYPE_UNRESOLVED", f"no type could be inferred for {n}", identifier=n)
            elif n not in inf.env:
                self.add(scope_name, "TYPE_UNRESOLVED", f"{n} is never constrained", identifier=n)
        for ev, local in event_locals.items():
            ptypes = {}
            for p, tv in local.items():
                t = inf.u.to_semtype(tv)
                if t is None:
                    self.add(f"{scope_name}/events/{ev}", "TYPE_UNRESOLVED",
                             f"no type could be inferred for parameter {p}", identifier=p)
                else:
                    ptypes[p] = t
            info.params[ev] = ptypes
        for key, tv in inf.binders.items():
            if inf.u.to_semtype(tv) is None:
                self.add(scope_name, "TYPE_UNRESOLVED", f"no type for bound variable {key[1]}")
        return info

    def _type_formula(self, inf: Inference, f, local: dict):
        from ebforge.ast import Action

        if isinstance(f, Action):
            vt = inf.ident(f.variables[0]) if f.kind != "becomesSuch" else None
            if f.kind == "assign":
                inf.u.unify(inf.expr(f.expr, local), vt)
            elif f.kind == "becomesIn":
                inf.u.unify(inf.expr(f.expr, local), POW(vt))
            else:
                for v in f.variables:
                    inf.u.unify(inf.ident(prime(v)), inf.ident(v))
                inf.pred(f.pred, local)
            return
        if isinstance(f, Pred):
            inf.pred(f, local)
        else:
            inf.u.unify(inf.expr(f, local), INT)

    def run(self) -> list[Diagnostic]:
        self.links()
        for c in self.d.contexts:
            self.context(c)
            self.typecheck(c.name)
        for m in self.d.machines:
            self.machine(m)
            self.typecheck(m.name)
        # primed identifiers share their base variable's type
        return sorted(self.diags)


def well_formed(d: Development) -> list[Diagnostic]:
    """Sorted diagnostics; empty iff ``d`` is well formed."""
    return Checker(d).run()


def infer_types(d: Development, scope_name: str) -> TypeInfo:
    """Types for identifiers visible in a context or machine (plus primed copies)."""
    info = Checker(d).typecheck(scope_name)
    if d.has_machine(scope_name):
        for m in d.machine_chain(scope_name):
            for v in m.variables:
                if v in info.types:
                    info.types.setdefault(prime(v), info.types[v])
    return info
