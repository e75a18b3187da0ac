from __future__ import annotations

from ebforge.repair.classify import (
    CATEGORY_NAMES, GOAL_SHAPES, PRECEDENCE, ProofStateSummary, RepairRule, RuleCategory, classify,
    recommend, summarize,
)
from ebforge.repair.functions import (
    OUTCOMES, REGISTRY, AtomicRepair, InvalidRepair, InvalidTarget, RepairContext, RepairRecord,
    RejectedCompile, RepairSession, apply_repair, compile_edit, edit, guard_acceptance, read_log, status_delta, validate,
)

__all__ = [
    "CATEGORY_NAMES", "GOAL_SHAPES", "OUTCOMES", "PRECEDENCE", "REGISTRY", "AtomicRepair",
    "InvalidRepair", "InvalidTarget", "ProofStateSummary", "RepairContext", "RepairRecord",
    "RejectedCompile", "RepairRule", "RepairSession", "compile_edit", "RuleCategory", "apply_repair", "classify", "edit",
    "guard_acceptance", "read_log", "recommend", "status_delta", "summarize", "validate",
]
