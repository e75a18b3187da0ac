"""Proof-state summaries, category matching and repair-rule recommendation."""
from __future__ import annotations

from dataclasses import dataclass, field

from ebforge.ast import Pred, free_vars
from ebforge.frontend.formula import render

GOAL_SHAPES = ("contradiction", "definitional", "existential", "equalityCrossRefinement",
               "universalGoal", "other")

CATEGORY_NAMES = {
    1: "ContradictoryGoal",
    2: "TrueByDefinition",
    3: "ExistentialGoal",
    4: "EqualityPO",
    5: "WellDefinedness",
    6: "QuantifiedInvariantPreservation",
    7: "UninstantiatedHypothesis",
    "default": "Default",
}
PRECEDENCE = (7, 1, 2, 3, 4, 5, 6)


@dataclass(frozen=True)
class RuleCategory:
    id: int | str
    name: str

    @classmethod
    def of(cls, cid) -> "RuleCategory":
        return cls(cid, CATEGORY_NAMES[cid])


@dataclass(frozen=True)
class ProofStateSummary:
    po_name: str
    po_kind: str
    goal_shape: str = "other"
    uninstantiated_universal: tuple[str, ...] = ()
    similar_quantified: tuple[str, ...] = ()
    origin_element: str = ""
    history: tuple[str, ...] = ()
    quantified_invariant: str | None = None  # "forall" / "exists" for INV POs on such invariants
    goal_text: str = ""
    bound_is_variable: bool = False
    candidates: tuple[str, ...] = ()

    def __post_init__(self):
        if self.goal_shape not in GOAL_SHAPES:
            raise ValueError(f"unknown goal shape {self.goal_shape!r}")

    def to_json(self) -> dict:
        return {"poName": self.po_name, "poKind": self.po_kind, "goalShape": self.goal_shape,
                "hypothesisFlags": {"hasUninstantiatedUniversal": list(self.uninstantiated_universal),
                                    "hasSimilarQuantifiedHyp": list(self.similar_quantified)},
                "originElement": self.origin_element, "history": list(self.history),
                "quantifiedInvariant": self.quantified_invariant, "goal": self.goal_text}


@dataclass(frozen=True)
class RepairRule:
    category: int | str
    text: str
    hints: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"category": self.category, "text": self.text, "hints": self.hints}


def classify(s: ProofStateSummary) -> list[RuleCategory]:
    """All matching categories in precedence order, or the default category."""
    match = {
        7: bool(s.uninstantiated_universal),
        1: s.goal_shape == "contradiction",
        2: s.goal_shape == "definitional",
        3: s.goal_shape == "existential",
        4: s.po_kind == "EQL" or s.goal_shape == "equalityCrossRefinement",
        5: s.po_kind == "WD",
        6: s.po_kind == "INV" and (s.quantified_invariant is not None
                                   or s.goal_shape == "universalGoal"),
    }
    cats = [RuleCategory.of(c) for c in PRECEDENCE if match[c]]
    return cats or [RuleCategory.of("default")]


def _about(origin: str) -> str:
    if "/guards/" in origin:
        return "guard"
    if "/invariants/" in origin:
        return "invariant"
    if "/actions/" in origin or "/events/" in origin:
        return "event"
    if "/axioms/" in origin or "/theorems/" in origin:
        return "context"
    return "other"


def recommend(cats: list[RuleCategory], s: ProofStateSummary) -> list[RepairRule]:
    if not cats:
        raise ValueError("recommend needs at least one category")
    target = s.origin_element
    about = _about(target)
    out: list[RepairRule] = []
    for c in cats:
        cid = c.id
        if cid == 7:
            out.append(RepairRule(7, "A quantified hypothesis added by an earlier repair is still "
                                     "uninstantiated while the proof stays open; propose "
                                     "instantiation values for it",
                                  {"target": list(s.uninstantiated_universal),
                                   "candidates": list(s.candidates)}))
        elif cid == 2:
            out.append(RepairRule(2, "The goal should follow by definition; apply the matching "
                                     "tactic (unfold the definition or rewrite with the equality)",
                                  {"target": target, "goal": s.goal_text}))
            out.append(RepairRule(2, "If the tactic leaves the proof unchanged or the goal is "
                                     "false, treat it like a contradictory goal",
                                  {"target": target}))
        elif cid == 1:
            if about == "invariant":
                out.append(RepairRule(1, "The obligation comes from an invariant: change the "
                                         "invariant so the contradiction disappears",
                                      {"target": target}))
            else:
                out.append(RepairRule(1, "The obligation comes from an event: add or change its "
                                         "guards or actions so the contradiction disappears",
                                      {"target": target}))
        elif cid == 3:
            if s.bound_is_variable or s.po_kind == "FIS":
                out.append(RepairRule(3, "The existential ranges over a variable: add or change "
                                         "actions that give it a value",
                                      {"target": target, "goal": s.goal_text}))
            else:
                out.append(RepairRule(3, "The existential ranges over constants: state the "
                                         "existence as a context axiom",
                                      {"target": target, "goal": s.goal_text}))
        elif cid == 4:
            out.append(RepairRule(4, "Look for an indirect relation H between the two sides "
                                     "(for example equal images under a function) and, when it is "
                                     "justified, add an axiom H => G",
                                  {"target": target, "goal": s.goal_text,
                                   "candidates": list(s.candidates)}))
        elif cid == 5:
            if about == "guard":
                out.append(RepairRule(5, "The obligation is about a guard: strengthen the guard "
                                         "with the well-definedness condition of its expression",
                                      {"target": target, "condition": s.goal_text}))
            else:
                out.append(RepairRule(5, "The obligation is about an invariant: strengthen the "
                                         "invariant with the well-definedness condition of its "
                                         "expression",
                                      {"target": target, "condition": s.goal_text}))
        elif cid == 6:
            if s.quantified_invariant == "exists":
                out.append(RepairRule(6, "Existential invariant: handle it like an existential "
                                         "goal", {"target": target}))
            else:
                out.append(RepairRule(6, "Universal invariant: find a quantified hypothesis "
                                         "whose conclusion resembles the goal and instantiate it "
                                         "with the primed variables",
                                      {"target": target, "similar": list(s.similar_quantified)}))
        elif cid == "default":
            out.append(RepairRule("default", "Compare the invariant before and after the event "
                                             "(inv versus inv') to see which pre-states make the "
                                             "step fail, and exclude them",
                                  {"target": target, "goal": s.goal_text}))
            out.append(RepairRule("default", "Add the hypothesis the proof is missing, as a "
                                             "guard or an invariant, when the failing pre-states "
                                             "are unreachable",
                                  {"target": target, "goal": s.goal_text}))
    return out


# -- summaries from proof trees ------------------------------------------------

def _shape(goal: Pred, hyps: list[Pred], kind: str) -> str:
    op = goal.op
    if op == "falsity":
        return "contradiction"
    if op == "exists":
        return "existential"
    if op == "forall":
        return "universalGoal"
    if op == "equal" and kind == "EQL":
        return "equalityCrossRefinement"
    if op in ("equal", "member"):
        a, b = goal.args
        if a == b or (b.op == "setLit" and a in b.args):
            return "definitional"
        names = {n.value for n in (a, b) if n.op == "identRef"}
        for h in hyps:
            if h.op == "equal" and any(x.op == "identRef" and x.value in names for x in h.args):
                return "definitional"
    return "other"


def _similar(goal: Pred, hyps) -> list[str]:
    out = []
    names = {n.split("'")[0] for n in free_vars(goal)}
    for lab, h in hyps:
        if h.op == "forall":
            body = h.args[0]
            concl = body.args[1] if body.op == "implies" else body
            if concl.op == goal.op or ({n.split("'")[0] for n in free_vars(h)} & names):
                out.append(lab)
    return out


def summarize(po, tree, history=()) -> ProofStateSummary:
    """Summary of the first open node of ``tree`` for obligation ``po``."""
    first = tree.first_open() if tree is not None else None
    node = first[1] if first else (tree.root if tree is not None else None)
    seq = node.sequent if node is not None else po.sequent
    goal = seq.goal
    hyps = list(seq.hypotheses)
    instantiated = set()
    if tree is not None:
        for t in tree.root.tactics_used():
            if t.name == "instantiate" and t.args:
                instantiated.add(t.args[0])
    from_repairs = set()
    for rec in history:
        lab = getattr(rec, "introduced_label", None)
        if lab:
            from_repairs.add(lab)
    unin = tuple(lab for lab, h in hyps
                 if h.op == "forall" and lab not in instantiated
                 and (lab in from_repairs or lab.split("/")[-1] in from_repairs
                      or lab.startswith("cut")))
    quant = None
    if po.kind == "INV" and po.sequent.goal.op in ("forall", "exists"):
        quant = po.sequent.goal.op
    origin = po.origin_labels[0] if po.origin_labels else ""
    terms = sorted({render(n) for n in goal.walk() if n.op == "identRef"})[:16]
    return ProofStateSummary(
        po_name=po.key, po_kind=po.kind, goal_shape=_shape(goal, [h for _, h in hyps], po.kind),
        uninstantiated_universal=unin, similar_quantified=tuple(_similar(goal, hyps)),
        origin_element=origin, history=tuple(str(getattr(r, "seq", r)) for r in history),
        quantified_invariant=quant, goal_text=render(goal),
        bound_is_variable=po.kind == "FIS", candidates=tuple(terms))
