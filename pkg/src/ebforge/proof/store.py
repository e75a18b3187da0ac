"""Per-obligation proof trees, their store, and replay after model edits."""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field

from ebforge.proof.auto import AutoProver, Budget
from ebforge.proof.tree import InapplicableTactic, ProofNode, Tactic, expand
from ebforge.semantics import ProofObligation, Sequent

STATUSES = ("discharged", "open", "stale")


@dataclass
class ProofTree:
    po_name: str
    root: ProofNode
    history: list[str] = field(default_factory=list)

    @property
    def closed(self) -> bool:
        return self.root.closed

    def first_open(self) -> tuple[tuple[int, ...], ProofNode] | None:
        leaves = self.root.open_leaves()
        return leaves[0] if leaves else None

    def to_json(self) -> dict:
        return {"po": self.po_name, "history": list(self.history), "root": self.root.to_json()}


class ProofStore:
    def __init__(self):
        self.trees: dict[str, ProofTree] = {}
        self.status: dict[str, str] = {}
        self.kinds: dict[str, str] = {}

    def __contains__(self, key: str) -> bool:
        return key in self.trees

    def __len__(self) -> int:
        return len(self.trees)

    def keys(self) -> list[str]:
        return sorted(self.trees)

    def tree(self, key: str) -> ProofTree:
        return self.trees[key]

    def put(self, key: str, tree: ProofTree, kind: str = "") -> None:
        self.trees[key] = tree
        self.status[key] = "discharged" if tree.closed else "open"
        if kind:
            self.kinds[key] = kind

    def mark_stale(self) -> None:
        for k in self.status:
            self.status[k] = "stale"

    def discharged(self) -> list[str]:
        return [k for k in self.keys() if self.status[k] == "discharged"]

    def open(self) -> list[str]:
        return [k for k in self.keys() if self.status[k] != "discharged"]

    def snapshot(self) -> "ProofStore":
        return copy.deepcopy(self)

    def to_json(self) -> dict:
        return {"entries": [{"po": k, "status": self.status[k], "kind": self.kinds.get(k, ""),
                             "tree": self.trees[k].to_json()} for k in self.keys()]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, ensure_ascii=False)

    def summary(self) -> dict[str, str]:
        return {k: self.status[k] for k in self.keys()}


def _replay(old: ProofNode, seq: Sequent, solver) -> ProofNode:
    new = ProofNode(seq)
    if old.tactic is None:
        return new
    try:
        kids = expand(seq, old.tactic, solver)
    except InapplicableTactic as exc:
        new.note = f"truncated: {exc.reason}"
        return new
    new.tactic = old.tactic
    olds = old.children
    new.children = [(_replay(olds[k], s, solver) if k < len(olds) else ProofNode(s))
                    for k, s in enumerate(kids)]
    return new


def replay_tree(tree: ProofTree, seq: Sequent, budget: Budget | None = None) -> ProofTree:
    budget = budget or Budget()
    root = _replay(tree.root, seq, budget.solver)
    AutoProver(budget).extend(root)
    return ProofTree(tree.po_name, root, list(tree.history))


def prove_all(pos: list[ProofObligation], budget: Budget | None = None,
              store: ProofStore | None = None) -> ProofStore:
    store = store or ProofStore()
    prover = AutoProver(budget)
    for po in pos:
        store.put(po.key, ProofTree(po.key, prover.prove(po.sequent)), po.kind)
    return store


def replay_all(d, store: ProofStore, pos: list[ProofObligation],
               budget: Budget | None = None) -> ProofStore:
    """Re-root every tree on the regenerated sequents; never raises on proof failure."""
    out = ProofStore()
    prover = AutoProver(budget)
    for po in pos:
        old = store.trees.get(po.key)
        if old is not None and old.root.closed and old.root.sequent == po.sequent \
                and all(t.name != "smtExternal" for t in old.root.tactics_used()):
            # replaying a closed tree on its own sequent reproduces it exactly
            tree = ProofTree(old.po_name, old.root, list(old.history))
        elif old is not None:
            tree = replay_tree(old, po.sequent, budget)
        else:
            tree = ProofTree(po.key, prover.prove(po.sequent))
        out.put(po.key, tree, po.kind)
    return out


def apply_tactic(tree: ProofTree, path, tactic: Tactic, budget: Budget | None = None) -> ProofTree:
    """Copy of ``tree`` with ``tactic`` applied at ``path`` and the new children auto-proved."""
    new = copy.deepcopy(tree)
    try:
        node = new.root.at(tuple(path))
    except IndexError:
        raise InapplicableTactic(tactic.name, f"no node at path {list(path)}") from None
    if node.closed:
        raise InapplicableTactic(tactic.name, "node is already closed")
    kids = expand(node.sequent, tactic, (budget or Budget()).solver)
    node.tactic = tactic
    node.children = [ProofNode(s) for s in kids]
    node.note = ""
    AutoProver(budget).extend(node)
    return new
