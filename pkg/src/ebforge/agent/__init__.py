from __future__ import annotations

from ebforge.agent.metrics import MetricsReport, UnknownRequirementId, compute_metrics, element_requirements
from ebforge.agent.pipeline import (
    GluingRejected, Limits, LoopResult, PipelineResult, RunConfig, SynthesisFailed, plan_refinement,
    repair_loop, run_pipeline, synthesize_step, validate_gluing, write_artifacts,
)
from ebforge.agent.plan import PlanInvalid, PlanStep, RefinementPlan, Requirement, RequirementDoc, validate_plan
from ebforge.agent.proposer import (
    ExternalProposer, InvalidResponse, ProposerError, ScriptExhausted, ScriptMismatch,
    ScriptedProposer, Validated, from_spec,
)

__all__ = [
    "ExternalProposer", "GluingRejected", "InvalidResponse", "Limits", "LoopResult", "MetricsReport",
    "PipelineResult", "PlanInvalid", "PlanStep", "ProposerError", "RefinementPlan", "Requirement",
    "RequirementDoc", "RunConfig", "ScriptExhausted", "ScriptMismatch", "ScriptedProposer",
    "SynthesisFailed", "UnknownRequirementId", "Validated", "compute_metrics", "element_requirements",
    "from_spec", "plan_refinement", "repair_loop", "run_pipeline", "synthesize_step",
    "validate_gluing", "validate_plan", "write_artifacts",
]
