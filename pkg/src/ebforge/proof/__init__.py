"""Sequent proving: tactics, the automatic pipeline, proof storage and replay."""
from ebforge.proof.auto import AutoProver, Budget, BudgetExhausted, auto_prove
from ebforge.proof.smt import UnexportableOperator, export_smtlib, run_solver, solve_external
from ebforge.proof.store import ProofStore, ProofTree, apply_tactic, prove_all, replay_all, replay_tree
from ebforge.proof.tree import CLOSING, InapplicableTactic, ProofNode, Tactic, expand

__all__ = [
    "AutoProver", "Budget", "BudgetExhausted", "CLOSING", "InapplicableTactic", "ProofNode",
    "ProofStore", "ProofTree", "Tactic", "UnexportableOperator", "apply_tactic", "auto_prove",
    "expand", "export_smtlib", "prove_all", "replay_all", "replay_tree", "run_solver",
    "solve_external",
]
