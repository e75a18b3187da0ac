"""Context-sensitive rewriting of expressions and predicates.

Every rewrite either preserves equivalence outright or is justified by facts
available in the surrounding hypotheses (typing of functions, linear bounds).
"""
from __future__ import annotations

from ebforge.ast import (
    FALSITY, TRUTH, Expr, Pred, SemType, conj, conjuncts, disj, free_vars, num, rel,
)
from ebforge.mc.values import UNDEF, Evaluator
from ebforge.proof.linarith import atom_constraints, unsat
from ebforge.proof.terms import ARITH, canonical_int, expr_type, is_int

NEGATE = {"lt": "geq", "leq": "gt", "gt": "leq", "geq": "lt", "equal": "notEqual",
          "notEqual": "equal", "member": "notMember", "notMember": "member"}
INT_REL = ("lt", "leq", "gt", "geq")


def _lit(e: Expr) -> bool:
    return e.op in ("intLit", "boolLit")


def _ground(t) -> bool:
    if free_vars(t):
        return False
    return not any(n.op in ("forall", "exists", "naturals", "integers") for n in t.walk())


class Facts:
    """What the hypotheses tell the rewriter: typed functions and linear rows."""

    def __init__(self, hyps: list[Pred], types: dict[str, SemType], occurring: set | None = None):
        self.types = types
        self.hypset = set(hyps)
        self.funs: dict[Expr, tuple[Expr, Expr, bool]] = {}
        self.rows: list = []
        self.occurring = occurring if occurring is not None else set()
        self._cache: dict = {}
        flat = [c for h in hyps for c in conjuncts(h)]
        self.hypset |= set(flat)
        for h in flat:
            if h.op == "member" and h.args[1].op in ("totalFun", "partialFun"):
                a, b = h.args[1].args
                total = h.args[1].op == "totalFun"
                old = self.funs.get(h.args[0])
                if old is None or (total and not old[2]):
                    self.funs[h.args[0]] = (a, b, total)
            rows = self.linear(h)
            if rows is not None:
                self.rows.extend(rows)

    @classmethod
    def empty(cls, types) -> "Facts":
        return cls([], types)

    def linear(self, p: Pred, negate: bool = False):
        if p.op in INT_REL or (p.op in ("equal", "notEqual")
                               and (is_int(p.args[0], self.types) or is_int(p.args[1], self.types))):
            return atom_constraints(p, negate)
        return None

    def entails(self, p: Pred) -> bool:
        if p.op == "truth" or p in self.hypset:
            return True
        if p.op == "and":
            return all(self.entails(a) for a in p.args)
        if p in self._cache:
            return self._cache[p]
        rows = self.linear(p, negate=True)
        ok = rows is not None and unsat(self.rows + rows)
        self._cache[p] = ok
        return ok

    def refutes(self, p: Pred) -> bool:
        if p.op == "falsity":
            return True
        if p.op in NEGATE and Pred(NEGATE[p.op], p.args) in self.hypset:
            return True
        if p.op == "not" and p.args[0] in self.hypset:
            return True
        rows = self.linear(p)
        return rows is not None and unsat(self.rows + rows)

    def total_domain(self, f: Expr) -> Expr | None:
        info = self.funs.get(f)
        return info[0] if info and info[2] else None


class Simplifier:
    def __init__(self, facts: Facts):
        self.f = facts
        self.types = facts.types

    # -- membership facts used as side conditions ---------------------------
    def in_set(self, x: Expr, s: Expr) -> bool:
        p = self.pred(Pred("member", (x, s)), side=True)
        return self.f.entails(p)

    # -- expressions --------------------------------------------------------
    def expr(self, e: Expr) -> Expr:
        if e.args:
            e = e.with_args(self.expr(a) for a in e.args)
        op = e.op
        if op in ARITH and e.op != "intLit":
            return canonical_int(e)
        if op == "div" and all(a.op == "intLit" for a in e.args) and e.args[1].value != 0:
            a, b = e.args[0].value, e.args[1].value
            q = abs(a) // abs(b)
            return num(q if (a >= 0) == (b > 0) else -q)
        if op == "dom":
            a = self.f.total_domain(e.args[0])
            if a is not None:
                return a
        if op == "ran":
            a = self.f.total_domain(e.args[0])
            if a is not None:
                return self.expr(Expr("image", (e.args[0], a)))
        if op == "range":
            lo, hi = e.args
            if self.f.entails(rel("lt", hi, lo)):
                return Expr("emptySet")
        if op == "image":
            return self._image(e)
        if op in ("min", "max"):
            return self._extremum(e)
        if op == "card":
            s = e.args[0]
            if s.op == "emptySet":
                return num(0)
            if s.op == "range" and self.f.entails(rel("leq", s.args[0], canonical_int(
                    Expr("add", (s.args[1], num(1)))))):
                return canonical_int(Expr("add", (Expr("sub", (s.args[1], s.args[0])), num(1))))
        if op == "setLit":
            seen = []
            for a in e.args:
                if a not in seen:
                    seen.append(a)
            if len(seen) != len(e.args):
                return Expr("setLit", tuple(seen))
        if op == "union":
            a, b = e.args
            if a.op == "emptySet" or a == b:
                return b
            if b.op == "emptySet":
                return a
        if op == "inter":
            a, b = e.args
            if a.op == "emptySet" or a == b:
                return a
            if b.op == "emptySet":
                return b
        if op == "setminus":
            a, b = e.args
            if b.op == "emptySet" or a.op == "emptySet":
                return a
        return e

    def _image(self, e: Expr) -> Expr:
        fun, s = e.args
        if s.op == "emptySet":
            return s
        dom = self.f.total_domain(fun)
        if dom is None:
            return e
        if s.op == "range" and s.args[0] == s.args[1]:
            s = Expr("setLit", (s.args[0],))
        if s.op == "setLit" and all(self.in_set(t, dom) for t in s.args):
            return self.expr(Expr("setLit", tuple(Expr("apply", (fun, t)) for t in s.args)))
        return e

    def _extremum(self, e: Expr) -> Expr:
        s = e.args[0]
        better = "leq" if e.op == "min" else "geq"
        if s.op == "setLit":
            if len(s.args) == 1:
                return s.args[0]
            if all(is_int(t, self.types) for t in s.args):
                for t in s.args:
                    if all(u == t or self.f.entails(rel(better, t, u)) for u in s.args):
                        return t
            return e
        if s.op == "image" and s.args[1].op == "range":
            fun, (lo, hi) = s.args[0], s.args[1].args
            dom = self.f.total_domain(fun)
            prev = canonical_int(Expr("sub", (hi, num(1))))
            inner = Expr(e.op, (Expr("image", (fun, Expr("range", (lo, prev)))),))
            if (dom is not None and inner in self.f.occurring
                    and self.f.entails(rel("leq", lo, prev)) and self.in_set(hi, dom)):
                return self.expr(Expr(e.op, (Expr("setLit", (inner, Expr("apply", (fun, hi)))),)))
        return e

    # -- predicates ---------------------------------------------------------
    def pred(self, p: Pred, side: bool = False) -> Pred:
        op = p.op
        if op in ("truth", "falsity"):
            return p
        if op == "not":
            return self._not(self.pred(p.args[0], side))
        if op == "and":
            parts = [self.pred(a, side) for a in p.args]
            if any(a.op == "falsity" for a in parts):
                return FALSITY
            return conj(_dedupe(parts))
        if op == "or":
            parts = [self.pred(a, side) for a in p.args]
            if any(a.op == "truth" for a in parts):
                return TRUTH
            return disj(_dedupe(parts))
        if op == "implies":
            a, b = self.pred(p.args[0], side), self.pred(p.args[1], side)
            if a.op == "falsity" or b.op == "truth" or a == b:
                return TRUTH
            if a.op == "truth":
                return b
            if b.op == "falsity":
                return self._not(a)
            ante = set(_parts(a))
            if all(c in ante for c in _parts(b)):
                return TRUTH
            return Pred("implies", (a, b))
        if op == "iff":
            a, b = self.pred(p.args[0], side), self.pred(p.args[1], side)
            if a == b:
                return TRUTH
            if a.op == "truth":
                return b
            if b.op == "truth":
                return a
            return Pred("iff", (a, b))
        if op in ("forall", "exists"):
            inner = Simplifier(Facts.empty({k: v for k, v in self.types.items()
                                            if k not in p.value}))
            body = inner.pred(p.args[0])
            if body.op in ("truth", "falsity"):
                return body
            keep = tuple(x for x in p.value if x in free_vars(body))
            if not keep:
                return body
            return Pred(op, (body,), keep)
        p = p.with_args(self.expr(a) for a in p.args)
        out = self._atom(p)
        if out.op not in ("truth", "falsity") and out.op != p.op and out != p:
            return self.pred(out, side)
        if out.op not in ("truth", "falsity") and _ground(out):
            v = Evaluator(types=self.types).holds(out, {})
            if v is not UNDEF:
                return TRUTH if v else FALSITY
        return out

    def _not(self, a: Pred) -> Pred:
        op = a.op
        if op == "truth":
            return FALSITY
        if op == "falsity":
            return TRUTH
        if op == "not":
            return a.args[0]
        if op in NEGATE:
            return self.pred(Pred(NEGATE[op], a.args))
        if op == "and":
            return disj(self._not(x) for x in a.args)
        if op == "or":
            return conj(self._not(x) for x in a.args)
        if op == "implies":
            return conj([a.args[0], self._not(a.args[1])])
        return Pred("not", (a,))

    def _atom(self, p: Pred) -> Pred:
        op = p.op
        if op == "finite":
            return TRUTH if self.finite(p.args[0]) else p
        a, b = p.args
        if op in ("equal", "notEqual"):
            yes = op == "equal"
            if a == b:
                return TRUTH if yes else FALSITY
            if _lit(a) and _lit(b):
                return TRUTH if (a.value == b.value) == yes else FALSITY
            if b.op == "emptySet" or a.op == "emptySet":
                s = a if b.op == "emptySet" else b
                empty = self.emptiness(s)
                if empty is not None:
                    return empty if yes else self._not(empty)
            if a.op == "boolLit" and b.op != "boolLit":
                return Pred(op, (b, a))
            if b.op == "boolLit" and not yes and expr_type(a, self.types) is not None:
                return Pred("equal", (a, Expr("boolLit", (), not b.value)))
            if is_int(a, self.types) or is_int(b, self.types):
                return self._int_rel(p)
            return p
        if op in INT_REL:
            if a == b:
                return TRUTH if op in ("leq", "geq") else FALSITY
            return self._int_rel(p)
        if op == "member":
            return self._member(a, b)
        if op == "notMember":
            return self._not(self._member(a, b))
        if op == "subset":
            if a == b or a.op == "emptySet":
                return TRUTH
            if a.op == "range" and b.op == "range":
                (lo, hi), (c, d) = a.args, b.args
                return disj([rel("lt", hi, lo), conj([rel("leq", c, lo), rel("leq", hi, d)])])
            if a.op == "setLit":
                return conj(Pred("member", (t, b)) for t in a.args)
        return p

    def _int_rel(self, p: Pred) -> Pred:
        rows = atom_constraints(p)
        if rows and len(rows) == 1 and not rows[0][1]:
            kind, _, c = rows[0]
            holds = {"le": c <= 0, "eq": c == 0, "ne": c != 0}[kind]
            return TRUTH if holds else FALSITY
        return p

    def _member(self, x: Expr, s: Expr) -> Pred:
        op = s.op
        if op == "naturals":
            return rel("leq", num(0), x)
        if op == "integers":
            return TRUTH
        if op == "bools":
            return TRUTH
        if op == "emptySet":
            return FALSITY
        if op == "range":
            return conj([rel("leq", s.args[0], x), rel("leq", x, s.args[1])])
        if op == "setLit":
            return disj(Pred("equal", (x, t)) for t in s.args)
        if op == "union":
            return disj([Pred("member", (x, s.args[0])), Pred("member", (x, s.args[1]))])
        if op == "inter":
            return conj([Pred("member", (x, s.args[0])), Pred("member", (x, s.args[1]))])
        if op == "setminus":
            return conj([Pred("member", (x, s.args[0])), Pred("notMember", (x, s.args[1]))])
        if x.op == "apply":
            info = self.f.funs.get(x.args[0])
            if info and info[1] == s and self.f.entails(self.pred(
                    Pred("member", (x.args[1], info[0])), side=True)):
                return TRUTH
        return Pred("member", (x, s))

    def emptiness(self, s: Expr) -> Pred | None:
        """Predicate equivalent to ``s = {}`` when one is known."""
        if s.op == "emptySet":
            return TRUTH
        if s.op == "setLit":
            return FALSITY
        if s.op in ("naturals", "integers", "bools"):
            return FALSITY
        if s.op == "range":
            return rel("lt", s.args[1], s.args[0])
        if s.op == "image":
            fun, arg = s.args
            dom = self.f.total_domain(fun)
            if dom is None:
                return None
            if arg.op == "setLit":
                return FALSITY if arg.args else TRUTH
            if arg.op == "range" and dom.op == "range":
                (a, b), (c, d) = arg.args, dom.args
                return disj([rel("lt", b, a), rel("lt", d, c), rel("lt", d, a), rel("lt", b, c)])
            if arg == dom:
                return self.emptiness(dom)
        return None

    def finite(self, s: Expr) -> bool:
        op = s.op
        if op in ("range", "setLit", "emptySet", "bools"):
            return True
        if op in ("image", "ran"):
            fun = s.args[0]
            dom = s.args[1] if op == "image" else self.f.total_domain(fun)
            if dom is not None and self.finite(dom):
                return True
            return Pred("finite", (s,)) in self.f.hypset
        if op == "dom":
            dom = self.f.total_domain(s.args[0])
            return dom is not None and self.finite(dom)
        if op == "inter":
            return self.finite(s.args[0]) or self.finite(s.args[1])
        if op == "union":
            return self.finite(s.args[0]) and self.finite(s.args[1])
        if op == "setminus":
            return self.finite(s.args[0])
        t = expr_type(s, self.types)
        if t is not None and t.kind == "Pow" and t.args[0].kind == "BOOL":
            return True
        return Pred("finite", (s,)) in self.f.hypset


def _parts(p: Pred) -> list[Pred]:
    return list(p.args) if p.op == "and" else [p]


def _dedupe(ps: list[Pred]) -> list[Pred]:
    out: list[Pred] = []
    for p in ps:
        if p not in out:
            out.append(p)
    return out
