"""JSON interchange format (schemaVersion 1)."""
from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

import jsonschema

from ebforge.ast import Action, Context, Development, Event, LabeledPred, Machine
from ebforge.frontend.check import well_formed
from ebforge.frontend.diagnostics import Diagnostic, DiagnosticError, SchemaViolation, errors
from ebforge.frontend.formula import ParseError, parse_action, parse_expr, parse_pred, render, render_action


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(resources.files("ebforge.frontend").joinpath("schema.json").read_text())


def _schema_path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "/"


class _Builder:
    def __init__(self):
        self.diags: list[Diagnostic] = []

    def formula(self, fn, src: str, path: str):
        try:
            return fn(src)
        except ParseError as exc:
            self.diags.append(Diagnostic(path, "SYNTAX_ERROR", exc.message,
                                         hint={"line": exc.line, "column": exc.column}))
            return None

    def make(self, cls, path: str, **kw):
        try:
            return cls(**kw)
        except ValueError as exc:
            self.diags.append(Diagnostic(path, "BAD_IDENT", str(exc)))
            return None

    def labeled(self, items, path: str) -> tuple[LabeledPred, ...]:
        out = []
        for it in items:
            p = self.formula(parse_pred, it["predicate"], f"{path}/{it['label']}")
            if p is not None:
                lp = self.make(LabeledPred, f"{path}/{it['label']}", label=it["label"], pred=p,
                               requirements=tuple(it.get("requirements", ())))
                if lp is not None:
                    out.append(lp)
        return tuple(out)

    def event(self, ev: dict, path: str) -> Event | None:
        path = f"{path}/{ev['name']}"
        acts = []
        for a in ev.get("actions", ()):
            apath = f"{path}/actions/{a['label']}"
            parsed = self.formula(parse_action, a["action"], apath)
            if parsed is None:
                continue
            kind, names, body = parsed
            kw = {"pred": body} if kind == "becomesSuch" else {"expr": body}
            act = self.make(Action, apath, label=a["label"], kind=kind, variables=names,
                            requirements=tuple(a.get("requirements", ())), **kw)
            if act is not None:
                acts.append(act)
        return self.make(Event, path, name=ev["name"], parameters=tuple(ev.get("parameters", ())),
                         guards=self.labeled(ev.get("guards", ()), f"{path}/guards"),
                         actions=tuple(acts), refines=ev.get("refines"),
                         requirements=tuple(ev.get("requirements", ())))

    def development(self, doc: dict) -> Development:
        ctxs = []
        for c in doc["contexts"]:
            n = c["name"]
            ctx = self.make(Context, n, name=n, extends=c.get("extends"),
                            sets=tuple(c.get("sets", ())), constants=tuple(c.get("constants", ())),
                            axioms=self.labeled(c.get("axioms", ()), f"{n}/axioms"),
                            theorems=self.labeled(c.get("theorems", ()), f"{n}/theorems"))
            if ctx is not None:
                ctxs.append(ctx)
        machines = []
        for m in doc["machines"]:
            n = m["name"]
            variants = []
            for k, v in enumerate(m.get("variants", ())):
                e = self.formula(parse_expr, v, f"{n}/variants/{k}")
                if e is not None:
                    variants.append(e)
            events = [self.event(e, f"{n}/events") for e in m["events"]]
            mach = self.make(Machine, n, name=n, refines=m.get("refines"), sees=m.get("sees"),
                             variables=tuple(m.get("variables", ())),
                             invariants=self.labeled(m.get("invariants", ()), f"{n}/invariants"),
                             variants=tuple(variants),
                             theorems=self.labeled(m.get("theorems", ()), f"{n}/theorems"),
                             events=tuple(e for e in events if e is not None))
            if mach is not None:
                machines.append(mach)
        return Development(tuple(ctxs), tuple(machines))


def load_document(doc) -> dict:
    if isinstance(doc, dict):
        return doc
    if isinstance(doc, bytes):
        doc = doc.decode("utf-8")
    try:
        return json.loads(doc)
    except json.JSONDecodeError as exc:
        raise SchemaViolation([Diagnostic("/", "SCHEMA_VIOLATION", f"invalid JSON: {exc.msg}",
                                          hint={"line": exc.lineno, "column": exc.colno})]) from None


def parse_json(doc, check: bool = True) -> Development:
    """Build a development from a JSON document.

    Raises SchemaViolation when the structure is wrong and DiagnosticError for
    syntax or (when ``check``) well-formedness failures. Never returns a
    partial development.
    """
    data = load_document(doc)
    v = jsonschema.Draft202012Validator(schema())
    errs = sorted(v.iter_errors(data), key=lambda e: (_schema_path(e), e.message))
    if errs:
        raise SchemaViolation([Diagnostic(_schema_path(e), "SCHEMA_VIOLATION", e.message) for e in errs])
    b = _Builder()
    d = b.development(data)
    if b.diags:
        raise DiagnosticError(b.diags)
    if check:
        found = errors(well_formed(d))
        if found:
            raise DiagnosticError(found)
    return d


def _labeled(items) -> list[dict]:
    return [{"label": i.label, "predicate": render(i.pred), "requirements": list(i.requirements)}
            for i in items]


def to_document(d: Development) -> dict:
    ctxs = [{
        "name": c.name, "extends": c.extends, "sets": list(c.sets), "constants": list(c.constants),
        "axioms": _labeled(c.axioms), "theorems": _labeled(c.theorems),
    } for c in d.contexts]
    machines = []
    for m in d.machines:
        events = []
        for e in m.events:
            events.append({
                "name": e.name, "refines": e.refines, "parameters": list(e.parameters),
                "guards": _labeled(e.guards),
                "actions": [{"label": a.label,
                             "action": render_action(a.kind, a.variables, a.formulas()[0]),
                             "requirements": list(a.requirements)} for a in e.actions],
                "requirements": list(e.requirements),
            })
        machines.append({
            "name": m.name, "refines": m.refines, "sees": m.sees, "variables": list(m.variables),
            "invariants": _labeled(m.invariants), "variants": [render(v) for v in m.variants],
            "theorems": _labeled(m.theorems), "events": events,
        })
    return {"schemaVersion": 1, "contexts": ctxs, "machines": machines}


def serialize_json(d: Development) -> bytes:
    return (json.dumps(to_document(d), indent=2, ensure_ascii=False) + "\n").encode()
