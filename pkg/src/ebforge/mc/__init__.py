from __future__ import annotations

from ebforge.mc.explore import (
    CancelToken, Cancelled, MCResult, Step, Trace, carriers_for, explore, replay_trace, satisfiable,
    solve_constants,
)
from ebforge.mc.values import (
    UNDEF, Bounds, CarrierElem, Evaluator, NonEnumerableDomain, UnboundIdent, evaluate, show, vkey,
)

__all__ = [
    "UNDEF", "Bounds", "CancelToken", "Cancelled", "CarrierElem", "Evaluator", "MCResult",
    "NonEnumerableDomain", "Step", "Trace", "UnboundIdent", "carriers_for", "evaluate", "explore",
    "replay_trace", "satisfiable", "show", "solve_constants", "vkey",
]
