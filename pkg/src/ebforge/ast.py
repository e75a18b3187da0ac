"""Abstract syntax for Event-B developments.

Expressions and predicates are immutable trees.  Every node carries an
operator tag, a tuple of children and an optional payload (literal value,
identifier name, or binder list for quantifiers).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
PRIME = "'"

EXPR_OPS = {
    # tag: arity (None = variadic)
    "intLit": 0, "boolLit": 0, "identRef": 0,
    "add": 2, "sub": 2, "mul": 2, "div": 2, "minus": 1,
    "setLit": None, "range": 2, "dom": 1, "ran": 1, "image": 2, "apply": 2,
    "min": 1, "max": 1, "card": 1,
    "union": 2, "inter": 2, "setminus": 2, "pairMaplet": 2,
    "totalFun": 2, "partialFun": 2,
    "emptySet": 0, "naturals": 0, "integers": 0, "bools": 0,
}

PRED_OPS = {
    "truth": 0, "falsity": 0, "not": 1, "and": None, "or": None,
    "implies": 2, "iff": 2,
    "equal": 2, "notEqual": 2, "lt": 2, "leq": 2, "gt": 2, "geq": 2,
    "member": 2, "notMember": 2, "subset": 2,
    "forall": 1, "exists": 1, "finite": 1,
}

RELATIONS = ("equal", "notEqual", "lt", "leq", "gt", "geq", "member", "notMember", "subset")


class IllFormedSubstitution(ValueError):
    pass


class ConflictingAssignment(ValueError):
    pass


class Term:
    """Shared node implementation for :class:`Expr` and :class:`Pred`."""

    __slots__ = ("op", "args", "value", "_hash")
    OPS: dict = {}

    def __init__(self, op: str, args: tuple = (), value=None):
        arity = self.OPS.get(op, -1)
        if arity == -1:
            raise ValueError(f"unknown {type(self).__name__} operator {op!r}")
        args = tuple(args)
        if arity is not None and len(args) != arity:
            raise ValueError(f"{op} expects {arity} children, got {len(args)}")
        if op in ("and", "or") and len(args) < 2:
            raise ValueError(f"{op} needs at least two children")
        object.__setattr__(self, "op", op)
        object.__setattr__(self, "args", args)
        object.__setattr__(self, "value", value)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, key, value):
        raise AttributeError("terms are immutable")

    def __eq__(self, other):
        if self is other:
            return True
        if type(other) is not type(self):
            return NotImplemented
        return (hash(self) == hash(other) and self.op == other.op
                and self.value == other.value and self.args == other.args)

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((type(self).__name__, self.op, self.value, self.args))
            object.__setattr__(self, "_hash", h)
        return h

    def __reduce__(self):
        return (type(self), (self.op, self.args, self.value))

    def __repr__(self):
        from ebforge.frontend.formula import render

        return f"{type(self).__name__}({render(self)!r})"

    def with_args(self, args):
        args = tuple(args)
        if args == self.args:
            return self
        return type(self)(self.op, args, self.value)

    def size(self) -> int:
        return 1 + sum(a.size() for a in self.args)

    def walk(self):
        yield self
        for a in self.args:
            yield from a.walk()


class Expr(Term):
    __slots__ = ()
    OPS = EXPR_OPS


class Pred(Term):
    __slots__ = ()
    OPS = PRED_OPS


# -- constructors -----------------------------------------------------------

def var(name: str) -> Expr:
    return Expr("identRef", (), name)


def num(k: int) -> Expr:
    return Expr("intLit", (), int(k))


def boolean(b: bool) -> Expr:
    return Expr("boolLit", (), bool(b))


TRUE_E = boolean(True)
FALSE_E = boolean(False)
TRUTH = Pred("truth")
FALSITY = Pred("falsity")
EMPTY = Expr("emptySet")
NAT = Expr("naturals")
INTS = Expr("integers")
BOOLS = Expr("bools")


def rel(op: str, a: Expr, b: Expr) -> Pred:
    return Pred(op, (a, b))


def eq(a: Expr, b: Expr) -> Pred:
    return Pred("equal", (a, b))


def member(a: Expr, s: Expr) -> Pred:
    return Pred("member", (a, s))


def neg(p: Pred) -> Pred:
    return Pred("not", (p,))


def implies(a: Pred, b: Pred) -> Pred:
    return Pred("implies", (a, b))


def conj(preds: Iterable[Pred]) -> Pred:
    flat: list[Pred] = []
    for p in preds:
        if p.op == "truth":
            continue
        flat.extend(p.args if p.op == "and" else (p,))
    if not flat:
        return TRUTH
    if len(flat) == 1:
        return flat[0]
    return Pred("and", tuple(flat))


def disj(preds: Iterable[Pred]) -> Pred:
    flat: list[Pred] = []
    for p in preds:
        if p.op == "falsity":
            continue
        flat.extend(p.args if p.op == "or" else (p,))
    if not flat:
        return FALSITY
    if len(flat) == 1:
        return flat[0]
    return Pred("or", tuple(flat))


def conjuncts(p: Pred) -> list[Pred]:
    if p.op == "and":
        out = []
        for a in p.args:
            out.extend(conjuncts(a))
        return out
    if p.op == "truth":
        return []
    return [p]


def prime(name: str) -> str:
    return name + PRIME


def unprime(name: str) -> str:
    return name[:-1] if name.endswith(PRIME) else name


def is_primed(name: str) -> bool:
    return name.endswith(PRIME)


# -- free variables and substitution ---------------------------------------

def free_vars(t: Term) -> frozenset[str]:
    """Identifiers occurring unbound in ``t``."""
    if t.op == "identRef":
        return frozenset((t.value,))
    if t.op in ("forall", "exists"):
        return free_vars(t.args[0]) - frozenset(t.value)
    out: frozenset[str] = frozenset()
    for a in t.args:
        out |= free_vars(a)
    return out


def all_names(t: Term) -> set[str]:
    names = set()
    for n in t.walk():
        if n.op == "identRef":
            names.add(n.value)
        elif n.op in ("forall", "exists"):
            names.update(n.value)
    return names


def fresh_name(base: str, avoid: set[str] | frozenset[str]) -> str:
    base = unprime(base).rstrip("0123456789") or "x"
    k = 1
    while f"{base}{k}" in avoid:
        k += 1
    return f"{base}{k}"


def substitute(t: Term, sigma: Mapping[str, Expr]):
    """Capture-avoiding replacement of free identifiers."""
    for k, v in sigma.items():
        if not isinstance(v, Expr):
            raise IllFormedSubstitution(f"{k} is mapped to a non-expression {v!r}")
    if not sigma:
        return t
    range_fv: frozenset[str] = frozenset()
    for v in sigma.values():
        range_fv |= free_vars(v)
    return _subst(t, dict(sigma), range_fv)


def _subst(t: Term, sigma: dict, range_fv: frozenset[str]):
    if t.op == "identRef":
        return sigma.get(t.value, t)
    if t.op in ("forall", "exists"):
        binders = t.value
        inner = {k: v for k, v in sigma.items() if k not in binders}
        if not inner:
            return t
        body = t.args[0]
        touched = free_vars(body) & set(inner)
        if not touched:
            return t
        inner_fv: frozenset[str] = frozenset()
        for k in touched:
            inner_fv |= free_vars(inner[k])
        new_binders = []
        renaming: dict[str, Expr] = {}
        avoid = set(inner_fv) | all_names(body) | set(inner)
        for b in binders:
            if b in inner_fv:
                nb = fresh_name(b, avoid)
                avoid.add(nb)
                renaming[b] = var(nb)
                new_binders.append(nb)
            else:
                new_binders.append(b)
        if renaming:
            body = _subst(body, renaming, frozenset(v.value for v in renaming.values()))
        body = _subst(body, inner, inner_fv)
        return type(t)(t.op, (body,), tuple(new_binders))
    if not t.args:
        return t
    return t.with_args(_subst(a, sigma, range_fv) for a in t.args)


def rename_vars(t: Term, mapping: Mapping[str, str]):
    return substitute(t, {k: var(v) for k, v in mapping.items()})


# -- model structure --------------------------------------------------------

@dataclass(frozen=True)
class LabeledPred:
    label: str
    pred: Pred
    requirements: tuple[str, ...] = ()

    def __post_init__(self):
        check_ident(self.label, "label")


@dataclass(frozen=True)
class Action:
    """One action of an event.

    ``kind`` is ``assign`` (v := E), ``becomesIn`` (v :: S), or
    ``becomesSuch`` (v1, v2 :| P over primed copies).
    """

    label: str
    kind: str
    variables: tuple[str, ...]
    expr: Expr | None = None
    pred: Pred | None = None
    requirements: tuple[str, ...] = ()

    def __post_init__(self):
        check_ident(self.label, "label")
        if self.kind not in ("assign", "becomesIn", "becomesSuch"):
            raise ValueError(f"unknown action kind {self.kind}")
        for v in self.variables:
            check_ident(v, "variable")
        if self.kind in ("assign", "becomesIn") and (len(self.variables) != 1 or self.expr is None):
            raise ValueError(f"{self.kind} action needs one variable and an expression")
        if self.kind == "becomesSuch" and (not self.variables or self.pred is None):
            raise ValueError("becomesSuch action needs variables and a predicate")

    def before_after(self) -> Pred:
        v = self.variables
        if self.kind == "assign":
            return eq(var(prime(v[0])), self.expr)
        if self.kind == "becomesIn":
            return member(var(prime(v[0])), self.expr)
        return self.pred

    def formulas(self) -> list[Term]:
        return [self.expr] if self.expr is not None else [self.pred]


@dataclass(frozen=True)
class Event:
    name: str
    parameters: tuple[str, ...] = ()
    guards: tuple[LabeledPred, ...] = ()
    actions: tuple[Action, ...] = ()
    refines: str | None = None
    requirements: tuple[str, ...] = ()

    def __post_init__(self):
        check_ident(self.name, "event")
        for p in self.parameters:
            check_ident(p, "parameter")

    @property
    def assigned(self) -> tuple[str, ...]:
        out: list[str] = []
        for a in self.actions:
            out.extend(a.variables)
        return tuple(out)

    def guard(self) -> Pred:
        return conj(g.pred for g in self.guards)


INIT = "INITIALISATION"


@dataclass(frozen=True)
class Context:
    name: str
    extends: str | None = None
    sets: tuple[str, ...] = ()
    constants: tuple[str, ...] = ()
    axioms: tuple[LabeledPred, ...] = ()
    theorems: tuple[LabeledPred, ...] = ()

    def __post_init__(self):
        check_ident(self.name, "context")
        for s in self.sets + self.constants:
            check_ident(s, "identifier")


@dataclass(frozen=True)
class Machine:
    name: str
    refines: str | None = None
    sees: str | None = None
    variables: tuple[str, ...] = ()
    invariants: tuple[LabeledPred, ...] = ()
    variants: tuple[Expr, ...] = ()
    theorems: tuple[LabeledPred, ...] = ()
    events: tuple[Event, ...] = ()

    def __post_init__(self):
        check_ident(self.name, "machine")
        for v in self.variables:
            check_ident(v, "variable")

    def event(self, name: str) -> Event:
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)

    def has_event(self, name: str) -> bool:
        return any(e.name == name for e in self.events)

    @property
    def variant(self) -> Expr | None:
        return self.variants[0] if self.variants else None


@dataclass(frozen=True)
class Development:
    contexts: tuple[Context, ...] = ()
    machines: tuple[Machine, ...] = ()

    def context(self, name: str) -> Context:
        for c in self.contexts:
            if c.name == name:
                return c
        raise KeyError(name)

    def machine(self, name: str) -> Machine:
        for m in self.machines:
            if m.name == name:
                return m
        raise KeyError(name)

    def has_machine(self, name: str) -> bool:
        return any(m.name == name for m in self.machines)

    def has_context(self, name: str) -> bool:
        return any(c.name == name for c in self.contexts)

    def context_chain(self, name: str | None) -> list[Context]:
        """The context and everything it extends, outermost ancestor first."""
        chain: list[Context] = []
        seen = set()
        while name is not None and name not in seen and self.has_context(name):
            seen.add(name)
            c = self.context(name)
            chain.append(c)
            name = c.extends
        return chain[::-1]

    def machine_chain(self, name: str) -> list[Machine]:
        """The machine and its abstractions, most abstract first."""
        chain: list[Machine] = []
        seen = set()
        cur: str | None = name
        while cur is not None and cur not in seen and self.has_machine(cur):
            seen.add(cur)
            m = self.machine(cur)
            chain.append(m)
            cur = m.refines
        return chain[::-1]

    def seen_contexts(self, machine: str) -> list[Context]:
        out: list[Context] = []
        for m in self.machine_chain(machine):
            for c in self.context_chain(m.sees):
                if c not in out:
                    out.append(c)
        return out

    def replace_machine(self, m: Machine) -> "Development":
        return replace(self, machines=tuple(m if x.name == m.name else x for x in self.machines))

    def replace_context(self, c: Context) -> "Development":
        return replace(self, contexts=tuple(c if x.name == c.name else x for x in self.contexts))


def check_ident(name: str, what: str) -> None:
    if not isinstance(name, str) or not IDENT_RE.fullmatch(name) or not name.isascii():
        raise ValueError(f"invalid {what} identifier {name!r}")


# -- before-after predicates ------------------------------------------------

def before_after(event: Event, variables: Iterable[str]) -> Pred:
    """Single before-after predicate of ``event`` over ``variables`` and their primes.

    Unassigned variables get the frame condition ``v' = v``.
    """
    seen: set[str] = set()
    parts: list[Pred] = []
    for a in event.actions:
        for v in a.variables:
            if v in seen:
                raise ConflictingAssignment(f"{v} assigned twice in event {event.name}")
            seen.add(v)
        parts.append(a.before_after())
    for v in variables:
        if v not in seen:
            parts.append(eq(var(prime(v)), var(v)))
    return conj(parts)


def frame(variables: Iterable[str], assigned: Iterable[str]) -> list[Pred]:
    assigned = set(assigned)
    return [eq(var(prime(v)), var(v)) for v in variables if v not in assigned]


def primed_map(variables: Iterable[str]) -> dict[str, Expr]:
    return {v: var(prime(v)) for v in variables}


# -- semantic types ---------------------------------------------------------

@dataclass(frozen=True)
class SemType:
    kind: str  # INT | BOOL | Carrier | Pow | Pair
    args: tuple["SemType", ...] = ()
    name: str | None = None

    def __str__(self):
        if self.kind in ("INT", "BOOL"):
            return self.kind
        if self.kind == "Carrier":
            return self.name
        if self.kind == "Pow":
            return f"Pow({self.args[0]})"
        return f"Pair({self.args[0]}, {self.args[1]})"


INT_T = SemType("INT")
BOOL_T = SemType("BOOL")


def pow_t(t: SemType) -> SemType:
    return SemType("Pow", (t,))


def pair_t(a: SemType, b: SemType) -> SemType:
    return SemType("Pair", (a, b))


def carrier_t(name: str) -> SemType:
    return SemType("Carrier", (), name)
