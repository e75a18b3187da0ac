"""Linear integer arithmetic: Fourier-Motzkin with integer tightening and branch-and-bound.

Constraints are ``(kind, coeffs, const)`` with kind in {le, eq, ne} meaning
``sum(coeffs[x] * x) + const`` is <= 0, == 0 or != 0. Variables are arbitrary
hashable keys (terms that are not linear become opaque atoms).
"""
from __future__ import annotations

import math
from fractions import Fraction

from ebforge.ast import Expr, Pred

Lin = tuple  # (frozenset of (atom, coeff) pairs as dict, const)


class Unknown(Exception):
    """Search budget exhausted before a verdict."""


# -- linearization ----------------------------------------------------------

def linearize(e: Expr) -> tuple[dict, Fraction]:
    """Coefficient map and constant; non-linear subterms become atoms."""
    op = e.op
    if op == "intLit":
        return {}, Fraction(e.value)
    if op == "add" or op == "sub":
        a, ca = linearize(e.args[0])
        b, cb = linearize(e.args[1])
        sign = 1 if op == "add" else -1
        out = dict(a)
        for k, v in b.items():
            out[k] = out.get(k, 0) + sign * v
        return {k: v for k, v in out.items() if v != 0}, ca + sign * cb
    if op == "minus":
        a, ca = linearize(e.args[0])
        return {k: -v for k, v in a.items()}, -ca
    if op == "mul":
        a, ca = linearize(e.args[0])
        b, cb = linearize(e.args[1])
        if not a:
            return {k: ca * v for k, v in b.items() if ca * v != 0}, ca * cb
        if not b:
            return {k: cb * v for k, v in a.items() if cb * v != 0}, ca * cb
    return {e: Fraction(1)}, Fraction(0)


def _diff(a: Expr, b: Expr) -> tuple[dict, Fraction]:
    la, ca = linearize(a)
    lb, cb = linearize(b)
    out = dict(la)
    for k, v in lb.items():
        out[k] = out.get(k, 0) - v
    return {k: v for k, v in out.items() if v != 0}, ca - cb


def atom_constraints(p: Pred, negate: bool = False) -> list[tuple] | None:
    """Constraints equivalent to the integer relation ``p`` (or its negation).

    Returns None when ``p`` is not a relation between integer expressions.
    Equality is accepted as-is; callers must only pass integer-typed equalities.
    """
    op = p.op
    if op not in ("lt", "leq", "gt", "geq", "equal", "notEqual"):
        return None
    if negate:
        op = {"lt": "geq", "leq": "gt", "gt": "leq", "geq": "lt", "equal": "notEqual",
              "notEqual": "equal"}[op]
    a, b = p.args
    if op in ("gt", "geq"):
        a, b = b, a
        op = "lt" if op == "gt" else "leq"
    co, c = _diff(a, b)
    if op == "lt":  # a - b + 1 <= 0
        return [("le", co, c + 1)]
    if op == "leq":
        return [("le", co, c)]
    if op == "equal":
        return [("eq", co, c)]
    return [("ne", co, c)]


# -- solver -----------------------------------------------------------------

def _normalize(kind: str, co: dict, c: Fraction):
    """Scale to integer coefficients and tighten; returns None for a trivially true row,
    False for a trivially false one."""
    co = {k: Fraction(v) for k, v in co.items() if v != 0}
    c = Fraction(c)
    if not co:
        if kind == "le":
            return None if c <= 0 else False
        if kind == "eq":
            return None if c == 0 else False
        return None if c != 0 else False
    den = 1
    for v in list(co.values()) + [c]:
        den = den * v.denominator // math.gcd(den, v.denominator)
    ico = {k: int(v * den) for k, v in co.items()}
    ic = c * den
    g = 0
    for v in ico.values():
        g = math.gcd(g, abs(v))
    if kind == "le":
        ico = {k: v // g for k, v in ico.items()}
        ic = Fraction(math.ceil(Fraction(ic) / g))
    elif kind == "eq":
        if Fraction(ic) / g != int(Fraction(ic) / g):
            return False
        ico = {k: v // g for k, v in ico.items()}
        ic = Fraction(ic) / g
    else:
        if Fraction(ic) / g != int(Fraction(ic) / g):
            return None
        ico = {k: v // g for k, v in ico.items()}
        ic = Fraction(ic) / g
    return (kind, ico, Fraction(ic))


def _subst_row(row, x, expr_co: dict, expr_c: Fraction):
    kind, co, c = row
    a = co.get(x, 0)
    if a == 0:
        return row
    out = {k: v for k, v in co.items() if k != x}
    for k, v in expr_co.items():
        out[k] = out.get(k, 0) + a * v
    return (kind, {k: v for k, v in out.items() if v != 0}, c + a * expr_c)


def _eval(co: dict, c, model: dict):
    return sum(v * model[k] for k, v in co.items()) + c


class _Search:
    def __init__(self, node_budget: int = 400, row_budget: int = 4000):
        self.nodes = 0
        self.node_budget = node_budget
        self.row_budget = row_budget

    def model(self, rows: list) -> dict | None:
        """Integer model of ``rows`` or None when unsatisfiable."""
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise Unknown("branch budget")
        norm = []
        for r in rows:
            n = _normalize(*r)
            if n is False:
                return None
            if n is not None:
                norm.append(n)
        rows = norm
        # solve equalities with a unit coefficient by substitution
        subs: list[tuple] = []
        changed = True
        while changed:
            changed = False
            for idx, (kind, co, c) in enumerate(rows):
                if kind != "eq":
                    continue
                unit = next((k for k in sorted(co, key=repr) if abs(co[k]) == 1), None)
                if unit is None:
                    continue
                a = co[unit]
                ex_co = {k: Fraction(-v, a) for k, v in co.items() if k != unit}
                ex_c = Fraction(-c, a)
                subs.append((unit, ex_co, ex_c))
                rest = rows[:idx] + rows[idx + 1:]
                new = []
                for r in rest:
                    n = _normalize(*_subst_row(r, unit, ex_co, ex_c))
                    if n is False:
                        return None
                    if n is not None:
                        new.append(n)
                rows = new
                changed = True
                break
        ineqs = []
        nes = []
        for kind, co, c in rows:
            if kind == "le":
                ineqs.append((co, c))
            elif kind == "eq":
                ineqs.append((co, c))
                ineqs.append(({k: -v for k, v in co.items()}, -c))
            else:
                nes.append((co, c))
        m = self._fm(ineqs)
        if m is None:
            return None
        if isinstance(m, tuple):  # fractional variable: branch
            x, val = m
            lo = math.floor(val)
            left = rows + [("le", {x: 1}, Fraction(-lo))]
            right = rows + [("le", {x: -1}, Fraction(lo + 1))]
            return self._with_subs(self._either(left, right), subs)
        model = m
        # make sure every variable mentioned in disequalities has a value
        for co, c in nes:
            for k in co:
                model.setdefault(k, 0)
        for co, c in nes:
            if _eval(co, c, model) == 0:
                left = rows + [("le", co, c + 1)]
                right = rows + [("le", {k: -v for k, v in co.items()}, -c + 1)]
                return self._with_subs(self._either(left, right), subs)
        return self._with_subs(model, subs)

    def _either(self, left, right):
        m = self.model(left)
        return m if m is not None else self.model(right)

    @staticmethod
    def _with_subs(model, subs):
        if model is None:
            return None
        for x, co, c in reversed(subs):
            for k in co:
                model.setdefault(k, 0)
            model[x] = _eval(co, c, model)
        return model

    def _fm(self, ineqs: list[tuple[dict, Fraction]]):
        """Fourier-Motzkin; returns a model, (var, fractional value) or None."""
        stages = []
        rows = [(dict(co), c) for co, c in ineqs]
        while True:
            for co, c in rows:
                if not co and c > 0:
                    return None
            rows = [(co, c) for co, c in rows if co]
            vars_ = sorted({k for co, _ in rows for k in co}, key=repr)
            if not vars_:
                break
            best = None
            for x in vars_:
                pos = sum(1 for co, _ in rows if co.get(x, 0) > 0)
                neg = sum(1 for co, _ in rows if co.get(x, 0) < 0)
                score = pos * neg - pos - neg
                if best is None or score < best[0]:
                    best = (score, x)
            x = best[1]
            lower = [(co, c) for co, c in rows if co.get(x, 0) < 0]
            upper = [(co, c) for co, c in rows if co.get(x, 0) > 0]
            rest = [(co, c) for co, c in rows if co.get(x, 0) == 0]
            stages.append((x, lower, upper))
            new = list(rest)
            seen = set()
            for lco, lc in lower:
                for uco, uc in upper:
                    a = -lco[x]
                    b = uco[x]
                    co: dict = {}
                    for k, v in lco.items():
                        co[k] = co.get(k, 0) + b * v
                    for k, v in uco.items():
                        co[k] = co.get(k, 0) + a * v
                    co = {k: v for k, v in co.items() if v != 0 and k != x}
                    n = _normalize("le", co, b * lc + a * uc)
                    if n is False:
                        return None
                    if n is None:
                        continue
                    key = (tuple(sorted(((repr(k), v) for k, v in n[1].items()))), n[2])
                    if key in seen:
                        continue
                    seen.add(key)
                    new.append((n[1], n[2]))
            if len(new) > self.row_budget:
                raise Unknown("row budget")
            rows = new
        model: dict = {}
        for x, lower, upper in reversed(stages):
            lo = None
            hi = None
            for co, c in lower:  # -a x + rest <= 0  =>  x >= rest / a
                a = -co[x]
                rest = _eval({k: v for k, v in co.items() if k != x}, c, _fill(model, co, x))
                bound = Fraction(rest, 1) / a
                lo = bound if lo is None else max(lo, bound)
            for co, c in upper:  # a x + rest <= 0  =>  x <= -rest / a
                a = co[x]
                rest = _eval({k: v for k, v in co.items() if k != x}, c, _fill(model, co, x))
                bound = Fraction(-rest, 1) / a
                hi = bound if hi is None else min(hi, bound)
            if lo is not None and hi is not None and lo > hi:
                raise Unknown("inconsistent back-substitution")
            val = _pick(lo, hi)
            if val is None:
                return (x, lo)
            model[x] = val
        return model


def _fill(model: dict, co: dict, x) -> dict:
    for k in co:
        if k != x:
            model.setdefault(k, 0)
    return model


def _pick(lo, hi):
    if lo is None and hi is None:
        return 0
    if lo is None:
        return min(0, math.floor(hi))
    if hi is None:
        return max(0, math.ceil(lo))
    if math.ceil(lo) <= hi:
        if lo <= 0 <= hi:
            return 0
        return math.ceil(lo) if lo > 0 else math.floor(hi)
    return None


def satisfiable(rows: list[tuple], node_budget: int = 400) -> dict | None:
    """Integer model of the constraints, None if unsatisfiable; raises Unknown."""
    return _Search(node_budget).model(list(rows))


def unsat(rows: list[tuple], node_budget: int = 400) -> bool:
    """True only when the constraints have no integer solution."""
    try:
        return satisfiable(rows, node_budget) is None
    except Unknown:
        return False
