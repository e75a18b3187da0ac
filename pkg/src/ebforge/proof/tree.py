"""Proof trees and the individual tactics that expand them."""
from __future__ import annotations

from dataclasses import dataclass, field

from ebforge.ast import (
    FALSITY, TRUTH, Expr, Pred, SemType, conjuncts, free_vars, fresh_name, neg, substitute, var,
)
from ebforge.frontend.check import TypeClash, term_types
from ebforge.frontend.formula import ParseError, parse_expr, parse_pred, render
from ebforge.mc.values import UNDEF, Evaluator
from ebforge.proof.linarith import atom_constraints, unsat
from ebforge.proof.normalize import normalize
from ebforge.proof.simp import Facts
from ebforge.semantics import Sequent

CLOSING = {"hypClose", "trueGoal", "falseHyp", "groundEval", "linArith", "smtExternal"}
TACTICS = CLOSING | {"andSplit", "impIntro", "notIntro", "allIntro", "iffSplit", "witness",
                     "eqRewrite", "unfoldDef", "instantiate", "cut", "caseSplit", "orElim", "simp"}


class InapplicableTactic(Exception):
    def __init__(self, tactic: str, reason: str):
        super().__init__(f"{tactic}: {reason}")
        self.tactic = tactic
        self.reason = reason


@dataclass(frozen=True)
class Tactic:
    name: str
    args: tuple[str, ...] = ()

    def __post_init__(self):
        if self.name not in TACTICS:
            raise ValueError(f"unknown tactic {self.name!r}")

    def to_json(self) -> dict:
        return {"name": self.name, "args": list(self.args)}

    @classmethod
    def from_json(cls, d: dict) -> "Tactic":
        return cls(d["name"], tuple(d.get("args", ())))

    def __str__(self):
        return f"{self.name}({', '.join(self.args)})" if self.args else self.name


@dataclass
class ProofNode:
    sequent: Sequent
    tactic: Tactic | None = None
    children: list["ProofNode"] = field(default_factory=list)
    note: str = ""

    @property
    def closed(self) -> bool:
        if self.tactic is None:
            return False
        if not self.children:
            return self.tactic.name in CLOSING or self.tactic.name == "simp"
        return all(c.closed for c in self.children)

    @property
    def status(self) -> str:
        return "closed" if self.closed else "open"

    def open_leaves(self, path: tuple[int, ...] = ()) -> list[tuple[tuple[int, ...], "ProofNode"]]:
        if self.tactic is None:
            return [(path, self)]
        out = []
        for k, c in enumerate(self.children):
            out.extend(c.open_leaves(path + (k,)))
        return out

    def at(self, path) -> "ProofNode":
        node = self
        for k in path:
            node = node.children[k]
        return node

    def tactics_used(self) -> list[Tactic]:
        out = [self.tactic] if self.tactic else []
        for c in self.children:
            out.extend(c.tactics_used())
        return out

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def to_json(self, path: tuple[int, ...] = ()) -> dict:
        out = {"path": list(path), "status": self.status,
               "tactic": self.tactic.to_json() if self.tactic else None,
               "sequent": self.sequent.text(),
               "children": [c.to_json(path + (k,)) for k, c in enumerate(self.children)]}
        if self.note:
            out["note"] = self.note
        return out

    def dump(self, indent: int = 0) -> str:
        pad = "  " * indent
        tac = str(self.tactic) if self.tactic else "?"
        lines = [f"{pad}[{self.status}] {tac} |- {render(self.sequent.goal)}"]
        for c in self.children:
            lines.append(c.dump(indent + 1))
        return "\n".join(lines)


# -- sequent helpers ---------------------------------------------------------

def make(hyps, goal: Pred, types: dict[str, SemType]) -> Sequent:
    return Sequent(tuple(hyps), goal, tuple(sorted(types.items())))


def fresh_label(seq: Sequent, base: str) -> str:
    used = {lab for lab, _ in seq.hypotheses}
    k = 1
    while f"{base}{k}" in used:
        k += 1
    return f"{base}{k}"


def add_hyps(seq: Sequent, preds, base: str, goal: Pred | None = None, types=None) -> Sequent:
    hyps = list(seq.hypotheses)
    for p in preds:
        cur = make(hyps, seq.goal, {})
        hyps.append((fresh_label(cur, base), p))
    return make(hyps, seq.goal if goal is None else goal, seq.types if types is None else types)


def find_hyp(seq: Sequent, label: str) -> Pred:
    for lab, h in seq.hypotheses:
        if lab == label:
            return h
    raise InapplicableTactic("hyp", f"no hypothesis labelled {label}")


def linear_rows(seq: Sequent) -> list:
    facts = Facts(seq.hyps, seq.types)
    return facts.rows


def entailed_linear(seq: Sequent, goal: Pred) -> bool:
    facts = Facts(seq.hyps, seq.types)
    rows = facts.rows
    if unsat(rows):
        return True
    neg_rows = []
    for g in (goal.args if goal.op == "or" else (goal,)):
        r = facts.linear(g, negate=True)
        if r is None:
            return False
        neg_rows.extend(r)
    return unsat(rows + neg_rows)


def _parse_terms(args, tactic: str) -> list[Expr]:
    try:
        return [parse_expr(a) for a in args]
    except ParseError as exc:
        raise InapplicableTactic(tactic, f"unparsable term: {exc}") from None


def _parse_pred(text: str, tactic: str) -> Pred:
    try:
        return parse_pred(text)
    except ParseError as exc:
        raise InapplicableTactic(tactic, f"unparsable predicate: {exc}") from None


def binder_types(p: Pred, types: dict[str, SemType]) -> dict[str, SemType]:
    try:
        _, binders = term_types(p, types)
    except (TypeClash, KeyError, ValueError):
        return {}
    return {name: t for (node, name), t in binders.items() if node is p or node == p}


def _ground_value(p: Pred, types) -> object:
    if free_vars(p):
        return UNDEF
    try:
        return Evaluator(types=types).holds(p, {})
    except Exception:  # a ground formula over an unsupported construct
        return UNDEF


def _open_quant(p: Pred, seq: Sequent, values: list[Expr] | None, tactic: str):
    """Body of a quantifier with binders replaced by ``values`` or fresh names."""
    binders = list(p.value)
    bt = binder_types(p, seq.types)
    if values is None:
        avoid = set(seq.types) | set().union(*(free_vars(h) for h in seq.hyps)) | free_vars(p)
        names = []
        for b in binders:
            nb = b if b not in avoid else fresh_name(b, avoid)
            avoid.add(nb)
            names.append(nb)
        values = [var(n) for n in names]
        new_types = dict(seq.types)
        for b, n in zip(binders, names):
            if b in bt:
                new_types[n] = bt[b]
        return substitute(p.args[0], dict(zip(binders, values))), new_types
    if len(values) != len(binders):
        raise InapplicableTactic(tactic, f"expected {len(binders)} terms, got {len(values)}")
    return substitute(p.args[0], dict(zip(binders, values))), dict(seq.types)


# -- tactic application -------------------------------------------------------

def expand(seq: Sequent, t: Tactic, solver=None) -> list[Sequent]:
    """Children of applying ``t`` to ``seq``; an empty list means closed."""
    name = t.name
    goal = seq.goal
    hyps = seq.hyps
    types = seq.types
    if name == "trueGoal":
        if goal.op != "truth":
            raise InapplicableTactic(name, "goal is not true")
        return []
    if name == "hypClose":
        if goal.op == "truth" or all(c in hyps for c in conjuncts(goal)):
            return []
        raise InapplicableTactic(name, "goal is not among the hypotheses")
    if name == "falseHyp":
        have = set(hyps)
        if FALSITY in have or any(neg(h) in have for h in hyps):
            return []
        raise InapplicableTactic(name, "no contradictory hypothesis")
    if name == "groundEval":
        if _ground_value(goal, types) is True:
            return []
        raise InapplicableTactic(name, "goal is not a true variable-free formula")
    if name == "linArith":
        if entailed_linear(seq, goal):
            return []
        raise InapplicableTactic(name, "goal not entailed by linear hypotheses")
    if name == "smtExternal":
        from ebforge.proof.smt import solve_external

        verdict = solve_external(seq, solver, t.args[0] if t.args else "z3")
        if verdict == "unsat":
            return []
        raise InapplicableTactic(name, f"solver answered {verdict}")
    if name == "simp":
        n = normalize(seq.hypotheses, goal, types)
        if n.closed:
            return []
        out = make(n.hyps, n.goal, types)
        if out == seq:
            raise InapplicableTactic(name, "no simplification applies")
        return [out]
    if name == "andSplit":
        if goal.op != "and":
            raise InapplicableTactic(name, "goal is not a conjunction")
        return [make(seq.hypotheses, g, types) for g in goal.args]
    if name == "impIntro":
        if goal.op != "implies":
            raise InapplicableTactic(name, "goal is not an implication")
        return [add_hyps(seq, conjuncts(goal.args[0]), "imp", goal=goal.args[1])]
    if name == "notIntro":
        if goal.op != "not":
            raise InapplicableTactic(name, "goal is not a negation")
        return [add_hyps(seq, [goal.args[0]], "neg", goal=FALSITY)]
    if name == "iffSplit":
        if goal.op != "iff":
            raise InapplicableTactic(name, "goal is not an equivalence")
        a, b = goal.args
        return [make(seq.hypotheses, Pred("implies", (a, b)), types),
                make(seq.hypotheses, Pred("implies", (b, a)), types)]
    if name == "allIntro":
        if goal.op != "forall":
            raise InapplicableTactic(name, "goal is not universal")
        body, new_types = _open_quant(goal, seq, None, name)
        return [make(seq.hypotheses, body, new_types)]
    if name == "witness":
        if goal.op != "exists":
            raise InapplicableTactic(name, "goal is not existential")
        body, _ = _open_quant(goal, seq, _parse_terms(t.args, name), name)
        return [make(seq.hypotheses, body, types)]
    if name == "instantiate":
        if not t.args:
            raise InapplicableTactic(name, "missing hypothesis label")
        h = find_hyp(seq, t.args[0])
        if h.op != "forall":
            raise InapplicableTactic(name, f"hypothesis {t.args[0]} is not universal")
        body, _ = _open_quant(h, seq, _parse_terms(t.args[1:], name), name)
        return [add_hyps(seq, [body], "inst")]
    if name == "eqRewrite":
        if len(t.args) != 2 or t.args[1] not in ("lr", "rl"):
            raise InapplicableTactic(name, "expects a hypothesis label and direction lr|rl")
        h = find_hyp(seq, t.args[0])
        if h.op != "equal":
            raise InapplicableTactic(name, f"hypothesis {t.args[0]} is not an equality")
        lhs, rhs = h.args if t.args[1] == "lr" else h.args[::-1]
        from ebforge.proof.normalize import _rewrite

        new_goal = _rewrite(goal, lhs, rhs)
        new_hyps = [(lab, p if lab == t.args[0] else _rewrite(p, lhs, rhs))
                    for lab, p in seq.hypotheses]
        out = make(new_hyps, new_goal, types)
        if out == seq:
            raise InapplicableTactic(name, "nothing to rewrite")
        return [out]
    if name == "unfoldDef":
        if not t.args:
            raise InapplicableTactic(name, "missing hypothesis label")
        h = find_hyp(seq, t.args[0])
        if h.op != "equal" or h.args[0].op != "identRef" or h.args[0].value in free_vars(h.args[1]):
            raise InapplicableTactic(name, f"hypothesis {t.args[0]} is not a definition x = E")
        sigma = {h.args[0].value: h.args[1]}
        new_hyps = [(lab, substitute(p, sigma)) for lab, p in seq.hypotheses if lab != t.args[0]]
        return [make(new_hyps, substitute(goal, sigma), types)]
    if name == "cut":
        if not t.args:
            raise InapplicableTactic(name, "missing lemma")
        lemma = _parse_pred(t.args[0], name)
        return [make(seq.hypotheses, lemma, types), add_hyps(seq, [lemma], "cut")]
    if name == "caseSplit":
        if not t.args:
            raise InapplicableTactic(name, "missing case predicate")
        p = _parse_pred(t.args[0], name)
        return [add_hyps(seq, [p], "case"), add_hyps(seq, [neg(p)], "case")]
    if name == "orElim":
        if not t.args:
            raise InapplicableTactic(name, "missing hypothesis label")
        h = find_hyp(seq, t.args[0])
        if h.op != "or":
            raise InapplicableTactic(name, f"hypothesis {t.args[0]} is not a disjunction")
        rest = [(lab, p) for lab, p in seq.hypotheses if lab != t.args[0]]
        base = make(rest, goal, types)
        return [add_hyps(base, [d], "case") for d in h.args]
    raise InapplicableTactic(name, "unknown tactic")


def apply_rule(node: ProofNode, t: Tactic, solver=None) -> ProofNode:
    """Expand an open leaf in place and return it."""
    if node.tactic is not None:
        raise InapplicableTactic(t.name, "node is already expanded")
    kids = expand(node.sequent, t, solver)
    node.tactic = t
    node.children = [ProofNode(s) for s in kids]
    return node


__all__ = ["CLOSING", "InapplicableTactic", "ProofNode", "Tactic", "apply_rule", "expand", "make"]
