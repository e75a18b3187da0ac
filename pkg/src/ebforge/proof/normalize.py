"""Deterministic sequent normalization used by the ``simp`` tactic."""
from __future__ import annotations

from dataclasses import dataclass

from ebforge.ast import FALSITY, TRUTH, Expr, Pred, SemType, conjuncts, free_vars, is_primed, substitute
from ebforge.frontend.formula import render
from ebforge.proof.linarith import linearize
from ebforge.proof.simp import Facts, Simplifier
from ebforge.proof.terms import ARITH, canonical_int, is_int, lin_expr

MAX_ROUNDS = 24

Hyp = tuple[str, Pred]


@dataclass
class Normal:
    hyps: list[Hyp]
    goal: Pred
    closed: bool


def _flatten(hyps: list[Hyp]) -> list[Hyp]:
    out: list[Hyp] = []
    seen: set[Pred] = set()
    for lab, h in hyps:
        parts = conjuncts(h)
        for k, part in enumerate(parts):
            if part in seen:
                continue
            seen.add(part)
            out.append((lab if len(parts) == 1 else f"{lab}.{k + 1}", part))
    return out


def _subterms(preds) -> set:
    out: set = set()
    for p in preds:
        for n in p.walk():
            if isinstance(n, Expr):
                out.add(n)
    return out


def _rank(name: str) -> tuple:
    return (0 if is_primed(name) else 1, name)


def _definition(h: Pred, types: dict) -> tuple[str, Expr] | None:
    """``x = t`` read as a definition of x, if it is one."""
    if h.op != "equal":
        return None
    a, b = h.args
    cands = []
    for x, t in ((a, b), (b, a)):
        if x.op == "identRef" and x.value not in free_vars(t):
            cands.append((x.value, t))
    if not cands and (is_int(a, types) or is_int(b, types)):
        co, c = linearize(Expr("sub", (a, b)))
        for atom, k in co.items():
            if atom.op == "identRef" and abs(k) == 1:
                rest = {x: -v / k for x, v in co.items() if x != atom}
                if any(free_vars(r) & {atom.value} for r in rest):
                    continue
                if all(v.denominator == 1 for v in rest.values()):
                    cands.append((atom.value, lin_expr(rest, -c / k)))
    if not cands:
        return None
    return min(cands, key=lambda xt: _rank(xt[0]))


def _rules(hyps: list[Hyp]) -> list[tuple[int, Expr, Expr]]:
    rules = []
    for idx, (_, h) in enumerate(hyps):
        if h.op != "equal":
            continue
        a, b = h.args
        key_a, key_b = (a.size(), render(a)), (b.size(), render(b))
        lhs, rhs = (a, b) if key_a > key_b else (b, a)
        if lhs.op in ARITH or lhs.op in ("identRef", "boolLit"):
            continue
        if lhs in _subterms([rhs]):
            continue
        rules.append((idx, lhs, rhs))
    return rules


def _rewrite(t, lhs: Expr, rhs: Expr):
    if t == lhs:
        return rhs
    if not t.args:
        return t
    if t.op in ("forall", "exists") and free_vars(lhs) & set(t.value):
        return t
    return t.with_args(_rewrite(a, lhs, rhs) for a in t.args)


class Normalizer:
    def __init__(self, types: dict[str, SemType]):
        self.types = types

    def facts(self, hyps: list[Hyp], goal: Pred) -> Facts:
        preds = [h for _, h in hyps]
        return Facts(preds, self.types, _subterms(preds + [goal]))

    def run(self, hyps: list[Hyp], goal: Pred) -> Normal:
        hyps = _flatten(hyps)
        for _ in range(MAX_ROUNDS):
            before = (hyps, goal)
            simp = Simplifier(self.facts(hyps, goal))
            hyps = _flatten([(lab, simp.pred(h)) for lab, h in hyps])
            hyps = [(lab, h) for lab, h in hyps if h.op != "truth"]
            if any(h.op == "falsity" for _, h in hyps):
                return Normal(hyps, goal, True)
            simp = Simplifier(self.facts(hyps, goal))
            goal = simp.pred(goal)
            if self._closed(hyps, goal):
                return Normal(hyps, goal, True)
            hyps, goal = self._eliminate(hyps, goal)
            hyps, goal = self._orient(hyps, goal)
            hyps = self._modus_ponens(hyps, goal)
            if (hyps, goal) == before:
                break
        return Normal(hyps, goal, self._closed(hyps, goal))

    @staticmethod
    def _closed(hyps: list[Hyp], goal: Pred) -> bool:
        if goal.op == "truth":
            return True
        have = {h for _, h in hyps}
        if FALSITY in have:
            return True
        return all(c in have for c in conjuncts(goal))

    def _eliminate(self, hyps: list[Hyp], goal: Pred):
        best = None
        for idx, (_, h) in enumerate(hyps):
            d = _definition(h, self.types)
            if d is not None and (best is None or _rank(d[0]) < _rank(best[1][0])):
                best = (idx, d)
        if best is None:
            return hyps, goal
        idx, (x, t) = best
        if t.op in ARITH:
            t = canonical_int(t)
        sigma = {x: t}
        rest = [(lab, substitute(h, sigma)) for k, (lab, h) in enumerate(hyps) if k != idx]
        return rest, substitute(goal, sigma)

    def _orient(self, hyps: list[Hyp], goal: Pred):
        for idx, lhs, rhs in _rules(hyps):
            hit = any(k != idx and lhs in _subterms([h]) for k, (_, h) in enumerate(hyps))
            if not hit and lhs not in _subterms([goal]):
                continue
            hyps = [(lab, h if k == idx else _rewrite(h, lhs, rhs)) for k, (lab, h) in enumerate(hyps)]
            return hyps, _rewrite(goal, lhs, rhs)
        return hyps, goal

    def _modus_ponens(self, hyps: list[Hyp], goal: Pred) -> list[Hyp]:
        facts = self.facts(hyps, goal)
        out: list[Hyp] = []
        for lab, h in hyps:
            if h.op == "implies":
                ante = conjuncts(h.args[0])
                if any(facts.refutes(a) for a in ante):
                    continue
                if all(facts.entails(a) for a in ante):
                    out.append((lab, h.args[1]))
                    continue
            elif h.op == "or":
                alive = [a for a in h.args if not facts.refutes(a)]
                if not alive:
                    out.append((lab, FALSITY))
                    continue
                if len(alive) == 1:
                    out.append((lab, alive[0]))
                    continue
                if len(alive) < len(h.args):
                    out.append((lab, Pred("or", tuple(alive))))
                    continue
            out.append((lab, h))
        return _flatten(out)


def normalize(hyps: list[Hyp], goal: Pred, types: dict[str, SemType]) -> Normal:
    return Normalizer(types).run(list(hyps), goal)


__all__ = ["Normal", "normalize", "Normalizer"]
