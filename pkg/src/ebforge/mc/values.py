"""Runtime values and the ground evaluator."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

from ebforge.ast import Expr, Pred, SemType, Term, free_vars


class UnboundIdent(KeyError):
    pass


class NonEnumerableDomain(ValueError):
    pass


class _Undefined:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "Undefined"

    def __bool__(self):
        raise TypeError("Undefined has no truth value")

    def __reduce__(self):
        return (_Undefined, ())


UNDEF = _Undefined()


@dataclass(frozen=True, order=True)
class CarrierElem:
    set: str
    index: int

    def __repr__(self):
        return f"{self.set}{self.index}"


@dataclass(frozen=True)
class InfiniteSet:
    kind: str  # NAT | INT


NATURALS = InfiniteSet("NAT")
INTEGERS = InfiniteSet("INT")
BOOL_SET = frozenset({False, True})


@dataclass(frozen=True)
class FunSpace:
    dom: object
    cod: object
    total: bool


@dataclass(frozen=True)
class Bounds:
    int_lo: int = -4
    int_hi: int = 4
    carrier_size: int = 3
    depth: int = 20
    max_states: int = 20000

    def __post_init__(self):
        if self.int_lo > self.int_hi:
            raise ValueError("intLo must not exceed intHi")
        if self.carrier_size < 1 or self.depth < 0 or self.max_states < 1:
            raise ValueError("carrierSize >= 1, depth >= 0 and maxStates >= 1 are required")

    @classmethod
    def parse(cls, text: str) -> "Bounds":
        parts = [int(x) for x in text.split(",")]
        if len(parts) != 5:
            raise ValueError("bounds need lo,hi,carrier,depth,states")
        return cls(*parts)

    def to_json(self) -> dict:
        return {"intLo": self.int_lo, "intHi": self.int_hi, "carrierSize": self.carrier_size,
                "depth": self.depth, "maxStates": self.max_states}

    @classmethod
    def from_json(cls, d: dict) -> "Bounds":
        return cls(d["intLo"], d["intHi"], d["carrierSize"], d["depth"], d["maxStates"])


ENUM_CAP = 100_000


def is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def vkey(v):
    """Total order over values, used for deterministic enumeration."""
    if isinstance(v, bool):
        return (0, int(v))
    if isinstance(v, int):
        return (1, v)
    if isinstance(v, CarrierElem):
        return (2, v.set, v.index)
    if isinstance(v, tuple):
        return (3, vkey(v[0]), vkey(v[1]))
    if isinstance(v, frozenset):
        return (4, len(v), tuple(sorted(vkey(x) for x in v)))
    return (5, repr(v))


def show(v) -> str:
    if isinstance(v, bool):
        return "TRUE" if v else "FALSE"
    if isinstance(v, tuple):
        return f"{show(v[0])} |-> {show(v[1])}"
    if isinstance(v, frozenset):
        return "{" + ", ".join(show(x) for x in sorted(v, key=vkey)) + "}"
    if isinstance(v, InfiniteSet):
        return v.kind
    return repr(v)


def to_json(v):
    if isinstance(v, bool) or is_int(v):
        return v
    if isinstance(v, CarrierElem):
        return repr(v)
    if isinstance(v, tuple):
        return {"pair": [to_json(v[0]), to_json(v[1])]}
    if isinstance(v, frozenset):
        return {"set": [to_json(x) for x in sorted(v, key=vkey)]}
    return repr(v)


def value_type(v) -> SemType | None:
    from ebforge.ast import BOOL_T, INT_T, carrier_t, pair_t, pow_t

    if isinstance(v, bool):
        return BOOL_T
    if isinstance(v, int):
        return INT_T
    if isinstance(v, CarrierElem):
        return carrier_t(v.set)
    if isinstance(v, tuple):
        a, b = value_type(v[0]), value_type(v[1])
        return pair_t(a, b) if a and b else None
    if isinstance(v, frozenset):
        for x in v:
            t = value_type(x)
            return pow_t(t) if t else None
        return None
    if isinstance(v, InfiniteSet):
        return pow_t(INT_T)
    return None


def member_of(x, s) -> bool:
    if isinstance(s, frozenset):
        return x in s
    if isinstance(s, InfiniteSet):
        return is_int(x) and (s.kind == "INT" or x >= 0)
    if isinstance(s, FunSpace):
        if not isinstance(x, frozenset) or not all(isinstance(p, tuple) for p in x):
            return False
        firsts = [p[0] for p in x]
        if len(set(firsts)) != len(firsts):
            return False
        if not all(member_of(p[0], s.dom) and member_of(p[1], s.cod) for p in x):
            return False
        if s.total:
            if not isinstance(s.dom, frozenset):
                return False
            return set(firsts) == set(s.dom)
        return True
    raise NonEnumerableDomain(f"membership in {s!r}")


def subset_of(a, b) -> bool:
    if isinstance(a, frozenset):
        return all(member_of(x, b) for x in a)
    if isinstance(a, InfiniteSet) and isinstance(b, InfiniteSet):
        return a == b or b.kind == "INT"
    if isinstance(a, InfiniteSet) and isinstance(b, frozenset):
        return False
    raise NonEnumerableDomain("subset of a function space")


def enumerate_set(s, b: Bounds) -> list:
    """Elements of ``s`` within bounds, in value order."""
    if isinstance(s, frozenset):
        return sorted(s, key=vkey)
    if isinstance(s, InfiniteSet):
        lo = max(0, b.int_lo) if s.kind == "NAT" else b.int_lo
        return list(range(lo, b.int_hi + 1))
    if isinstance(s, FunSpace):
        if not isinstance(s.dom, frozenset):
            raise NonEnumerableDomain("function space over an infinite domain")
        dom = sorted(s.dom, key=vkey)
        cod = enumerate_set(s.cod, b)
        choices = cod if s.total else [None] + cod
        if len(choices) ** len(dom) > ENUM_CAP:
            raise NonEnumerableDomain("function space too large for the bounds")
        out = []
        for combo in itertools.product(choices, repeat=len(dom)):
            out.append(frozenset((d, c) for d, c in zip(dom, combo) if c is not None))
        return out
    raise NonEnumerableDomain(f"cannot enumerate {s!r}")


def type_domain(t: SemType, b: Bounds, carriers: dict[str, frozenset]) -> list:
    if t.kind == "INT":
        return list(range(b.int_lo, b.int_hi + 1))
    if t.kind == "BOOL":
        return [False, True]
    if t.kind == "Carrier":
        if t.name not in carriers:
            raise NonEnumerableDomain(f"unknown carrier {t.name}")
        return sorted(carriers[t.name], key=vkey)
    if t.kind == "Pair":
        return [(x, y) for x in type_domain(t.args[0], b, carriers)
                for y in type_domain(t.args[1], b, carriers)]
    base = type_domain(t.args[0], b, carriers)
    if 2 ** len(base) > ENUM_CAP:
        raise NonEnumerableDomain(f"powerset of {t.args[0]} too large for the bounds")
    out = []
    for r in range(len(base) + 1):
        out.extend(frozenset(c) for c in itertools.combinations(base, r))
    return out


# -- evaluator --------------------------------------------------------------

def _div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b > 0) else -q


class Evaluator:
    def __init__(self, bounds: Bounds | None = None, carriers: dict[str, frozenset] | None = None,
                 types: dict[str, SemType] | None = None):
        self.b = bounds or Bounds()
        self.carriers = carriers or {}
        self.types = types or {}

    # expressions
    def ev(self, e: Expr, env: dict):
        op = e.op
        if op == "identRef":
            try:
                return env[e.value]
            except KeyError:
                raise UnboundIdent(e.value) from None
        if op == "intLit" or op == "boolLit":
            return e.value
        if op == "emptySet":
            return frozenset()
        if op == "naturals":
            return NATURALS
        if op == "integers":
            return INTEGERS
        if op == "bools":
            return BOOL_SET
        if op in ("totalFun", "partialFun"):
            a = self.ev(e.args[0], env)
            c = self.ev(e.args[1], env)
            if a is UNDEF or c is UNDEF:
                return UNDEF
            return FunSpace(a, c, op == "totalFun")
        vals = [self.ev(a, env) for a in e.args]
        if any(v is UNDEF for v in vals):
            return UNDEF
        if op == "add":
            return vals[0] + vals[1]
        if op == "sub":
            return vals[0] - vals[1]
        if op == "mul":
            return vals[0] * vals[1]
        if op == "div":
            return UNDEF if vals[1] == 0 else _div(vals[0], vals[1])
        if op == "minus":
            return -vals[0]
        if op == "setLit":
            return frozenset(vals)
        if op == "range":
            if vals[1] - vals[0] > ENUM_CAP:
                raise NonEnumerableDomain("range too large")
            return frozenset(range(vals[0], vals[1] + 1))
        if op == "pairMaplet":
            return (vals[0], vals[1])
        f = vals[0]
        if op in ("dom", "ran"):
            if not isinstance(f, frozenset):
                raise NonEnumerableDomain("dom/ran of an infinite set")
            k = 0 if op == "dom" else 1
            return frozenset(p[k] for p in f)
        if op == "image":
            s = vals[1]
            if not isinstance(f, frozenset):
                raise NonEnumerableDomain("image of an infinite relation")
            return frozenset(p[1] for p in f if member_of(p[0], s))
        if op == "apply":
            if not isinstance(f, frozenset):
                return UNDEF
            hits = [p[1] for p in f if p[0] == vals[1]]
            return hits[0] if len(hits) == 1 else UNDEF
        if op in ("min", "max"):
            if not isinstance(f, frozenset) or not f:
                return UNDEF
            return min(f) if op == "min" else max(f)
        if op == "card":
            return len(f) if isinstance(f, frozenset) else UNDEF
        a, c = vals
        if op in ("union", "inter", "setminus"):
            if isinstance(a, frozenset) and isinstance(c, frozenset):
                return a | c if op == "union" else (a & c if op == "inter" else a - c)
            if op == "inter" and isinstance(a, frozenset):
                return frozenset(x for x in a if member_of(x, c))
            if op == "inter" and isinstance(c, frozenset):
                return frozenset(x for x in c if member_of(x, a))
            if op == "setminus" and isinstance(a, frozenset):
                return frozenset(x for x in a if not member_of(x, c))
            if a == c and op != "setminus":
                return a
            raise NonEnumerableDomain(f"{op} over infinite sets")
        raise ValueError(f"unknown expression operator {op}")

    # predicates: True / False / UNDEF
    def holds(self, p: Pred, env: dict):
        op = p.op
        if op == "truth":
            return True
        if op == "falsity":
            return False
        if op == "not":
            v = self.holds(p.args[0], env)
            return v if v is UNDEF else not v
        if op == "and":
            for a in p.args:
                v = self.holds(a, env)
                if v is UNDEF or v is False:
                    return v
            return True
        if op == "or":
            for a in p.args:
                v = self.holds(a, env)
                if v is UNDEF or v is True:
                    return v
            return False
        if op == "implies":
            v = self.holds(p.args[0], env)
            if v is UNDEF or v is False:
                return True if v is False else UNDEF
            return self.holds(p.args[1], env)
        if op == "iff":
            v = self.holds(p.args[0], env)
            w = self.holds(p.args[1], env)
            if v is UNDEF or w is UNDEF:
                return UNDEF
            return v == w
        if op in ("forall", "exists"):
            return self._quant(p, env)
        if op == "finite":
            s = self.ev(p.args[0], env)
            if s is UNDEF:
                return UNDEF
            return isinstance(s, frozenset)
        a = self.ev(p.args[0], env)
        c = self.ev(p.args[1], env)
        if a is UNDEF or c is UNDEF:
            return UNDEF
        if op == "equal":
            return a == c
        if op == "notEqual":
            return not (a == c)
        if op == "lt":
            return a < c
        if op == "leq":
            return a <= c
        if op == "gt":
            return a > c
        if op == "geq":
            return a >= c
        if op == "member":
            return member_of(a, c)
        if op == "notMember":
            return not member_of(a, c)
        if op == "subset":
            return subset_of(a, c)
        raise ValueError(f"unknown predicate operator {op}")

    def binder_domain(self, p: Pred, name: str, env: dict) -> list:
        body = p.args[0]
        guard = body.args[0] if (p.op == "forall" and body.op == "implies") else body
        parts = guard.args if guard.op == "and" else (guard,)
        bound = set(p.value)
        for g in parts:
            if g.op == "member" and g.args[0].op == "identRef" and g.args[0].value == name \
                    and not (free_vars(g.args[1]) & bound):
                s = self.ev(g.args[1], env)
                if s is not UNDEF:
                    return enumerate_set(s, self.b)
        t = self._binder_type(p, name, env)
        return type_domain(t, self.b, self.carriers)

    def _binder_type(self, p: Pred, name: str, env: dict) -> SemType:
        from ebforge.frontend.check import TypeClash, term_types

        known = dict(self.types)
        for k in free_vars(p):
            if k not in known and k in env:
                t = value_type(env[k])
                if t is not None:
                    known[k] = t
        try:
            _, binders = term_types(p, known)
        except TypeClash as exc:
            raise NonEnumerableDomain(str(exc)) from None
        t = binders.get((p, name))
        if t is None:
            raise NonEnumerableDomain(f"cannot determine a domain for bound variable {name}")
        return t

    def _quant(self, p: Pred, env: dict):
        names = p.value
        doms = []
        inner = dict(env)
        for n in names:
            doms.append(self.binder_domain(p, n, inner))
        want = p.op == "exists"
        saw_undef = False
        for combo in itertools.product(*doms):
            inner.update(zip(names, combo))
            v = self.holds(p.args[0], inner)
            if v is UNDEF:
                saw_undef = True
            elif v is want:
                return want
        return UNDEF if saw_undef else (not want)


def evaluate(t: Term, env: dict, bounds: Bounds | None = None, types: dict | None = None,
             carriers: dict | None = None):
    """Value of ``t`` under ``env``; UNDEF when a partial operator is misapplied."""
    ev = Evaluator(bounds, carriers, types)
    return ev.holds(t, env) if isinstance(t, Pred) else ev.ev(t, env)
