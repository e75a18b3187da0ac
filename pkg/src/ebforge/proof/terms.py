"""Typing helpers and canonical linear forms shared by the prover."""
from __future__ import annotations

from fractions import Fraction

from ebforge.ast import BOOL_T, INT_T, Expr, SemType, pair_t, pow_t
from ebforge.frontend.formula import render
from ebforge.proof.linarith import linearize

ARITH = {"intLit", "add", "sub", "mul", "minus"}


def expr_type(e: Expr, types: dict[str, SemType]) -> SemType | None:
    op = e.op
    if op in ("intLit", "add", "sub", "mul", "div", "minus", "card", "min", "max"):
        return INT_T
    if op == "boolLit":
        return BOOL_T
    if op == "identRef":
        return types.get(e.value)
    if op == "range" or op in ("naturals", "integers"):
        return pow_t(INT_T)
    if op == "bools":
        return pow_t(BOOL_T)
    if op == "setLit":
        for a in e.args:
            t = expr_type(a, types)
            if t is not None:
                return pow_t(t)
        return None
    if op == "pairMaplet":
        a, b = expr_type(e.args[0], types), expr_type(e.args[1], types)
        return pair_t(a, b) if a and b else None
    if op in ("union", "inter", "setminus"):
        return expr_type(e.args[0], types) or expr_type(e.args[1], types)
    if op in ("dom", "ran", "image", "apply"):
        ft = expr_type(e.args[0], types)
        if ft is None or ft.kind != "Pow" or ft.args[0].kind != "Pair":
            return None
        a, b = ft.args[0].args
        if op == "dom":
            return pow_t(a)
        if op in ("ran", "image"):
            return pow_t(b)
        return b
    if op in ("totalFun", "partialFun"):
        a, b = expr_type(e.args[0], types), expr_type(e.args[1], types)
        if a and b:
            return pow_t(pow_t(pair_t(a.args[0], b.args[0])))
    return None


def is_int(e: Expr, types: dict[str, SemType]) -> bool:
    t = expr_type(e, types)
    return t is not None and t.kind == "INT"


def _key(atom: Expr) -> str:
    return render(atom)


def lin_expr(co: dict, c: Fraction) -> Expr:
    """Canonical expression for a linear combination with integer coefficients."""
    terms = sorted(co.items(), key=lambda kv: _key(kv[0]))
    out: Expr | None = None
    for atom, k in terms:
        k = int(k)
        mag = abs(k)
        t = atom if mag == 1 else Expr("mul", (Expr("intLit", (), mag), atom))
        if out is None:
            out = t if k > 0 else Expr("minus", (t,))
        else:
            out = Expr("add" if k > 0 else "sub", (out, t))
    c = int(c)
    if out is None:
        return Expr("intLit", (), c)
    if c > 0:
        out = Expr("add", (out, Expr("intLit", (), c)))
    elif c < 0:
        out = Expr("sub", (out, Expr("intLit", (), -c)))
    return out


def canonical_int(e: Expr) -> Expr:
    """Canonical form of an arithmetic expression; atoms are kept as they are."""
    co, c = linearize(e)
    if any(v.denominator != 1 for v in co.values()) or c.denominator != 1:
        return e
    return lin_expr(co, c)
