"""Requirement documents and refinement plans."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

REQ_ID = re.compile(r"[A-Z][A-Z0-9]*-[0-9]+")


class PlanInvalid(ValueError):
    pass


@dataclass(frozen=True)
class Requirement:
    id: str
    category: str
    text: str


@dataclass(frozen=True)
class RequirementDoc:
    requirements: tuple[Requirement, ...]

    def __post_init__(self):
        ids = [r.id for r in self.requirements]
        if len(set(ids)) != len(ids):
            raise ValueError("requirement ids must be unique")
        for i in ids:
            if not REQ_ID.fullmatch(i):
                raise ValueError(f"malformed requirement id {i!r}")

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.requirements]

    def get(self, rid: str) -> Requirement:
        for r in self.requirements:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def to_json(self) -> dict:
        return {"requirements": [{"id": r.id, "category": r.category, "text": r.text}
                                 for r in self.requirements]}

    @classmethod
    def from_json(cls, d: dict) -> "RequirementDoc":
        reqs = []
        for r in d["requirements"]:
            rid = r["id"]
            reqs.append(Requirement(rid, r.get("category", rid.split("-")[0]), r.get("text", "")))
        return cls(tuple(reqs))

    @classmethod
    def load(cls, path) -> "RequirementDoc":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class PlanStep:
    index: int
    requirements: tuple[str, ...]
    gluing: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {"stepIndex": self.index, "requirements": list(self.requirements),
                "gluing": list(self.gluing)}


@dataclass(frozen=True)
class RefinementPlan:
    steps: tuple[PlanStep, ...] = field(default_factory=tuple)

    def to_json(self) -> dict:
        return {"steps": [s.to_json() for s in self.steps]}

    def step(self, i: int) -> PlanStep:
        return self.steps[i - 1]


PLAN_SCHEMA = {
    "type": "object",
    "required": ["steps"],
    "properties": {
        "steps": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["requirements"],
                "properties": {
                    "stepIndex": {"type": "integer", "minimum": 1},
                    "requirements": {"type": "array", "items": {"type": "string"}},
                    "gluing": {"type": "array", "items": {"type": "string"}},
                },
            },
        },
    },
}


def validate_plan(data: dict, doc: RequirementDoc) -> RefinementPlan:
    """Build a plan from proposer output, enforcing the partition property."""
    steps = []
    seen: dict[str, int] = {}
    for k, raw in enumerate(data["steps"], start=1):
        idx = raw.get("stepIndex", k)
        if idx != k:
            raise PlanInvalid(f"step {k} carries index {idx}")
        reqs = tuple(raw["requirements"])
        if not reqs:
            raise PlanInvalid(f"step {k} is empty")
        for r in reqs:
            if r not in doc.ids:
                raise PlanInvalid(f"step {k} names unknown requirement {r}")
            if r in seen:
                raise PlanInvalid(f"{r} is assigned to steps {seen[r]} and {k}")
            seen[r] = k
        glue = tuple(raw.get("gluing", ()))
        if k == 1 and glue:
            raise PlanInvalid("the first step cannot have gluing invariants")
        steps.append(PlanStep(k, reqs, glue))
    missing = [r for r in doc.ids if r not in seen]
    if missing:
        raise PlanInvalid("requirements not assigned to any step: " + ", ".join(missing))
    return RefinementPlan(tuple(steps))
