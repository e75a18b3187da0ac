"""Proposers: the pluggable decision-makers behind planning, synthesis and repair.

A proposer answers ``ask(task, payload, schema)`` with a JSON payload.
``Validated`` wraps any proposer, checks replies against the schema and
re-asks with the validation error attached until the retry limit.
"""
from __future__ import annotations

import json
import os
import time
import urllib.error
import urllib.request
from pathlib import Path

import jsonschema

from ebforge.frontend.jsonfmt import schema as model_schema
from ebforge.agent.plan import PLAN_SCHEMA

TASKS = ("plan", "synthesize", "repairDecision", "suggestBounds")

REPAIR_SCHEMA = {
    "anyOf": [
        {"type": "null"},
        {"type": "object", "required": ["function"],
         "properties": {"function": {"type": "string"}, "params": {"type": "object"}}},
    ],
}
BOUNDS_SCHEMA = {
    "anyOf": [
        {"type": "null"},
        {"type": "object", "required": ["intLo", "intHi", "carrierSize", "depth", "maxStates"],
         "properties": {k: {"type": "integer"}
                        for k in ("intLo", "intHi", "carrierSize", "depth", "maxStates")}},
    ],
}


def schema_for(task: str) -> dict:
    if task == "plan":
        return PLAN_SCHEMA
    if task == "synthesize":
        return model_schema()
    if task == "repairDecision":
        return REPAIR_SCHEMA
    if task == "suggestBounds":
        return BOUNDS_SCHEMA
    raise ValueError(f"unknown proposer task {task!r}")


class ProposerError(RuntimeError):
    pass


class ScriptMismatch(ProposerError):
    """The next scripted response is for a different task."""


class ScriptExhausted(ProposerError):
    pass


class InvalidResponse(ProposerError):
    pass


class ScriptedProposer:
    """Replays a JSON-lines file of ``{"task": ..., "payload": ...}`` responses in order."""

    def __init__(self, responses: list[dict], name: str = "scripted"):
        self.responses = list(responses)
        self.pos = 0
        self.name = name

    @classmethod
    def from_file(cls, path) -> "ScriptedProposer":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        out = []
        for n, line in enumerate(lines, start=1):
            if not line.strip() or line.lstrip().startswith("//"):
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ProposerError(f"{path}:{n}: {exc.msg}") from None
        return cls(out, f"scripted:{path}")

    def peek_task(self) -> str | None:
        return self.responses[self.pos]["task"] if self.pos < len(self.responses) else None

    def ask(self, task: str, payload: dict, schema: dict):
        if self.pos >= len(self.responses):
            raise ScriptExhausted(f"script has no response left for {task}")
        resp = self.responses[self.pos]
        if resp.get("task") != task:
            raise ScriptMismatch(f"response {self.pos + 1} is for {resp.get('task')!r}, asked {task!r}")
        self.pos += 1
        return resp.get("payload")

    def remaining(self) -> int:
        return len(self.responses) - self.pos


class ExternalProposer:
    """JSON over HTTP: POST ``{task, payload, schema, model}`` and read ``{payload}`` back."""

    def __init__(self, endpoint: str, model: str = "", key_env: str = "EBFORGE_API_KEY",
                 timeout: float = 60.0, retries: int = 2):
        self.endpoint = endpoint
        self.model = model
        self.key_env = key_env
        self.timeout = timeout
        self.retries = retries
        self.name = f"external:{endpoint}"

    def _headers(self) -> dict:
        h = {"Content-Type": "application/json"}
        key = os.environ.get(self.key_env)
        if key:
            h["Authorization"] = f"Bearer {key}"
        return h

    def ask(self, task: str, payload: dict, schema: dict):
        body = json.dumps({"task": task, "payload": payload, "schema": schema,
                           "model": self.model}).encode()
        last = None
        for attempt in range(self.retries + 1):
            req = urllib.request.Request(self.endpoint, data=body, headers=self._headers(),
                                         method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as r:
                    reply = json.loads(r.read().decode("utf-8"))
                if not isinstance(reply, dict) or "payload" not in reply:
                    raise ProposerError("reply has no payload field")
                return reply["payload"]
            except (urllib.error.URLError, TimeoutError, json.JSONDecodeError, ProposerError) as exc:
                last = exc
                time.sleep(min(2.0, 0.25 * 2 ** attempt))
        raise ProposerError(f"external proposer failed: {last}")


class Validated:
    """Schema-checks replies; one request in flight at a time."""

    def __init__(self, inner, retries: int = 3):
        self.inner = inner
        self.retries = max(1, retries)
        self.transcript: list[dict] = []

    @property
    def name(self) -> str:
        return getattr(self.inner, "name", type(self.inner).__name__)

    def ask(self, task: str, payload: dict):
        if task not in TASKS:
            raise ValueError(f"unknown proposer task {task!r}")
        schema = schema_for(task)
        validator = jsonschema.Draft202012Validator(schema)
        req = dict(payload)
        for _ in range(self.retries):
            reply = self.inner.ask(task, req, schema)
            errs = sorted(validator.iter_errors(reply), key=lambda e: e.message)
            self.transcript.append({"task": task, "valid": not errs})
            if not errs:
                return reply
            req = dict(payload, lastError="; ".join(e.message for e in errs[:3]))
        raise InvalidResponse(f"{task}: no valid reply after {self.retries} attempts")


def from_spec(spec: str, key_env: str = "EBFORGE_API_KEY", model: str = "",
              timeout: float = 60.0, retries: int = 2):
    """``scripted:<path>`` or ``external:<url>``."""
    kind, _, rest = spec.partition(":")
    if kind == "scripted" and rest:
        return ScriptedProposer.from_file(rest)
    if kind == "external" and rest:
        return ExternalProposer(rest, model=model, key_env=key_env, timeout=timeout, retries=retries)
    raise ValueError(f"proposer must be scripted:<path> or external:<url>, got {spec!r}")
