"""The automatic tactic pipeline."""
from __future__ import annotations

import time
from dataclasses import dataclass

from ebforge.ast import Expr, Pred, SemType, free_vars, neg
from ebforge.frontend.formula import render
from ebforge.proof.terms import expr_type
from ebforge.proof.tree import InapplicableTactic, ProofNode, Tactic, binder_types, expand
from ebforge.semantics import Sequent

MAX_CANDIDATES = 16


@dataclass
class Budget:
    nodes: int = 2000
    seconds: float = 5.0
    solver: str | None = None

    def start(self) -> "_Meter":
        return _Meter(self)


class BudgetExhausted(Exception):
    pass


class _Meter:
    def __init__(self, b: Budget):
        self.b = b
        self.used = 0
        self.deadline = time.monotonic() + b.seconds

    def tick(self) -> None:
        self.used += 1
        if self.used > self.b.nodes or time.monotonic() > self.deadline:
            raise BudgetExhausted()


def _try(node: ProofNode, t: Tactic, meter: _Meter, solver) -> bool:
    """Apply ``t`` to an open leaf; returns False (leaving the node untouched) if inapplicable."""
    try:
        kids = expand(node.sequent, t, solver)
    except InapplicableTactic:
        return False
    meter.tick()
    node.tactic = t
    node.children = [ProofNode(s) for s in kids]
    return True


def _reset(node: ProofNode) -> None:
    node.tactic = None
    node.children = []


def _terms_of(seq: Sequent) -> list[Expr]:
    out: list[Expr] = []
    for p in [seq.goal] + seq.hyps:
        for n in p.walk():
            if isinstance(n, Expr) and n not in out and not free_vars(n) - set(seq.types):
                out.append(n)
    return out


def candidates(seq: Sequent, want: SemType | None, extra=()) -> list[Expr]:
    """Bounded, deterministic instantiation candidates of the requested type."""
    pool: list[Expr] = list(extra)
    pool += [Expr("intLit", (), 0), Expr("intLit", (), 1), Expr("boolLit", (), True),
             Expr("boolLit", (), False)]
    for n in _terms_of(seq):
        if n.op == "range":
            pool.append(n.args[0])
        if n.op in ("identRef", "apply", "intLit", "boolLit") or n.op in ("add", "sub"):
            pool.append(n)
    out: list[Expr] = []
    types = seq.types
    for e in pool:
        t = expr_type(e, types)
        if want is not None and t is not None and t != want:
            continue
        if want is not None and t is None:
            continue
        if e not in out:
            out.append(e)
        if len(out) >= MAX_CANDIDATES:
            break
    return out


class AutoProver:
    def __init__(self, budget: Budget | None = None, max_branching: int = 2):
        self.budget = budget or Budget()
        self.max_branching = max_branching
        self._level = 0

    def prove(self, seq: Sequent) -> ProofNode:
        root = ProofNode(seq)
        self.extend(root)
        return root

    def extend(self, node: ProofNode) -> ProofNode:
        meter = self.budget.start()
        try:
            self._run(node, meter, depth=0)
        except BudgetExhausted:
            for _, leaf in node.open_leaves():
                leaf.note = leaf.note or "BudgetExhausted"
        return node

    # The pipeline: closers, normalization, safe decomposition, arithmetic,
    # then the branching rules which are kept only when they close everything.
    def _run(self, node: ProofNode, meter: _Meter, depth: int) -> bool:
        if node.tactic is not None:
            ok = True
            for c in node.children:
                ok = self._run(c, meter, depth + 1) and ok
            return ok
        meter.tick()
        solver = self.budget.solver
        seq = node.sequent
        for name in ("trueGoal", "hypClose", "falseHyp", "groundEval"):
            if _try(node, Tactic(name), meter, solver):
                return True
        if _try(node, Tactic("simp"), meter, solver):
            return self._run_children(node, meter, depth)
        g = seq.goal.op
        safe = {"and": "andSplit", "implies": "impIntro", "not": "notIntro", "forall": "allIntro",
                "iff": "iffSplit"}.get(g)
        if safe and _try(node, Tactic(safe), meter, solver):
            return self._run_children(node, meter, depth)
        if _try(node, Tactic("linArith"), meter, solver):
            return True
        if depth > 40 or self._level >= self.max_branching:
            return False
        for t in self._branching(seq):
            if self._attempt(node, t, meter, depth):
                return True
        if solver and _try(node, Tactic("smtExternal", ("z3",)), meter, solver):
            return True
        return False

    def _run_children(self, node, meter, depth) -> bool:
        ok = True
        for c in node.children:
            ok = self._run(c, meter, depth + 1) and ok
        return ok

    def _attempt(self, node: ProofNode, t: Tactic, meter: _Meter, depth: int) -> bool:
        if not _try(node, t, meter, self.budget.solver):
            return False
        self._level += 1
        try:
            closed = self._run_children(node, meter, depth)
        finally:
            self._level -= 1
        if closed:
            return True
        _reset(node)
        return False

    def _branching(self, seq: Sequent):
        goal = seq.goal
        if goal.op == "exists":
            bt = binder_types(goal, seq.types)
            binders = goal.value
            lists = [candidates(seq, bt.get(b)) for b in binders]
            combos = [[]]
            for cands in lists:
                combos = [c + [x] for c in combos for x in cands][:MAX_CANDIDATES]
            for combo in combos:
                yield Tactic("witness", tuple(render(e) for e in combo))
        for lab, h in seq.hypotheses:
            if h.op == "forall":
                bt = binder_types(h, seq.types)
                lists = [candidates(seq, bt.get(b)) for b in h.value]
                combos = [[]]
                for cands in lists:
                    combos = [c + [x] for c in combos for x in cands][:MAX_CANDIDATES]
                for combo in combos:
                    t = Tactic("instantiate", (lab,) + tuple(render(e) for e in combo))
                    if expand(seq, t)[0].hyps[-1] not in seq.hyps:
                        yield t
        for lab, h in seq.hypotheses:
            if h.op == "or":
                yield Tactic("orElim", (lab,))
        seen = set()
        for _, h in seq.hypotheses:
            if h.op == "implies":
                for a in (h.args[0].args if h.args[0].op == "and" else (h.args[0],)):
                    if (a.op in ("lt", "leq", "gt", "geq", "equal") and a not in seen
                            and a not in seq.hyps and neg(a) not in seq.hyps):
                        seen.add(a)
                        yield Tactic("caseSplit", (render(a),))


def auto_prove(seq: Sequent, budget: Budget | None = None) -> ProofNode:
    return AutoProver(budget).prove(seq)


__all__ = ["AutoProver", "Budget", "BudgetExhausted", "auto_prove", "candidates"]
