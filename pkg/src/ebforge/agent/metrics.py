"""Proof discharge rate, requirement coverage and fulfillment."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from ebforge.ast import Development
from ebforge.frontend.check import well_formed
from ebforge.frontend.diagnostics import errors
from ebforge.semantics import development_pos, generate_pos


class UnknownRequirementId(KeyError):
    pass


def element_requirements(d: Development) -> dict[str, tuple[str, ...]]:
    """Element path (as used in PO origin labels) -> requirement tags."""
    out: dict[str, tuple[str, ...]] = {}
    for c in d.contexts:
        for kind, items in (("axioms", c.axioms), ("theorems", c.theorems)):
            for a in items:
                out[f"{c.name}/{kind}/{a.label}"] = tuple(a.requirements)
    for m in d.machines:
        for i in m.invariants:
            out[f"{m.name}/invariants/{i.label}"] = tuple(i.requirements)
        for e in m.events:
            base = f"{m.name}/events/{e.name}"
            out[base] = tuple(e.requirements)
            for g in e.guards:
                out[f"{base}/guards/{g.label}"] = tuple(g.requirements)
            for a in e.actions:
                out[f"{base}/actions/{a.label}"] = tuple(a.requirements)
    return out


def _ratio(num: int, den: int) -> float:
    # an empty PO set counts as fully discharged
    return 1.0 if den == 0 else float(Fraction(num, den))


@dataclass
class MetricsReport:
    pdr: float
    rc: float
    rf: float
    refinement_pdr: float
    per_requirement: dict = field(default_factory=dict)
    per_po: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"pdr": self.pdr, "rc": self.rc, "rf": self.rf, "refinementPdr": self.refinement_pdr,
                "counts": self.counts, "perRequirement": self.per_requirement, "perPO": self.per_po}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def compute_metrics(d: Development, status: dict[str, str], doc) -> MetricsReport:
    """Metrics of the chain ``d`` given PO statuses keyed ``machine:name``.

    A requirement is covered when an element without errors carries its id and
    fulfilled when it is covered and every PO whose origin carries the id is
    discharged. Abstract-layer POs stay in the count, so a requirement proved
    at one level remains fulfilled as long as the refinement POs hold.
    """
    ids = set(doc.ids)
    tags = element_requirements(d)
    for path, reqs in tags.items():
        for r in reqs:
            if r not in ids:
                raise UnknownRequirementId(f"{path} carries unknown requirement {r}")
    bad_paths = {e.location.split(".")[0] for e in errors(well_formed(d))}
    pos = development_pos(d)
    final = d.machines[-1].name if d.machines else None
    final_keys = [p.key for p in generate_pos(d, final)] if final else []
    disc = lambda k: status.get(k) == "discharged"  # noqa: E731

    assoc: dict[str, list[str]] = {r: [] for r in doc.ids}
    for p in pos:
        carried = set()
        for lab in p.origin_labels:
            carried.update(tags.get(lab, ()))
        for r in sorted(carried):
            assoc[r].append(p.key)
    covered = {r: any(r in reqs and not any(path.startswith(b) for b in bad_paths if b)
                      for path, reqs in tags.items())
               for r in doc.ids}
    per_req = {}
    fulfilled = 0
    for r in doc.ids:
        ok = covered[r] and all(disc(k) for k in assoc[r])
        fulfilled += ok
        per_req[r] = {"covered": covered[r], "fulfilled": ok, "pos": assoc[r]}
    ref = [p.key for p in pos if p.refinement_po]
    report = MetricsReport(
        pdr=_ratio(sum(disc(k) for k in final_keys), len(final_keys)),
        rc=_ratio(sum(covered.values()), len(doc.ids)),
        rf=_ratio(fulfilled, len(doc.ids)),
        refinement_pdr=_ratio(sum(disc(k) for k in ref), len(ref)),
        per_requirement=per_req,
        per_po={p.key: status.get(p.key, "open") for p in pos},
        counts={"finalPOs": len(final_keys), "finalDischarged": sum(disc(k) for k in final_keys),
                "refinementPOs": len(ref), "refinementDischarged": sum(disc(k) for k in ref),
                "requirements": len(doc.ids)},
    )
    return report
