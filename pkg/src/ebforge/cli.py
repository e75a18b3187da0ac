"""Command-line entry point: ``ebforge <command> [flags]``.

Exit codes: 0 clean, 1 findings (diagnostics, violations, open POs), 2 usage or
configuration errors.
"""
from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from ebforge.frontend import DiagnosticError, load, serialize, well_formed
from ebforge.frontend.diagnostics import errors
from ebforge.mc import Bounds, explore
from ebforge.mc.values import show

CONFIG_NAME = "ebforge.toml"
CONFIG_KEYS = {"bounds", "solver", "proposer", "trials", "out", "jobs", "json", "deadlock",
               "model", "endpoint_timeout"}


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def _config(args) -> dict:
    path = Path(args.config) if args.config else Path(CONFIG_NAME)
    if not path.exists():
        if args.config:
            raise UsageError(f"config file {path} not found")
        return {}
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"{path}: unknown keys {', '.join(unknown)}")
    return data


def _setting(args, cfg: dict, name: str, default=None):
    v = getattr(args, name, None)
    if v is not None and v is not False:
        return v
    return cfg.get(name, default)


def _bounds(args, cfg) -> Bounds:
    raw = _setting(args, cfg, "bounds")
    if raw is None:
        return Bounds()
    try:
        return Bounds.parse(raw) if isinstance(raw, str) else Bounds.from_json(raw)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad --bounds {raw!r}: {exc}") from None


def _solver(args, cfg):
    s = _setting(args, cfg, "solver")
    if s is None:
        return None
    if shutil.which(s) is None:
        raise UsageError(f"solver {s!r} not found")
    return s


def _budget(args, cfg):
    from ebforge.proof import Budget
    return Budget(solver=_solver(args, cfg))


def _jobs(args, cfg) -> int:
    j = int(_setting(args, cfg, "jobs", 1))
    if j < 1:
        raise UsageError("--jobs must be at least 1")
    return j


def _limits(args, cfg):
    from ebforge.agent import Limits
    raw = _setting(args, cfg, "trials")
    if raw is None:
        return Limits()
    try:
        return Limits.parse(raw)
    except ValueError as exc:
        raise UsageError(f"bad --trials {raw!r}: {exc}") from None


def _proposer(args, cfg):
    from ebforge.agent import from_spec
    spec = _setting(args, cfg, "proposer")
    if spec is None:
        raise UsageError("--proposer scripted:<path> or external:<url> is required")
    try:
        return from_spec(spec, model=cfg.get("model", ""),
                         timeout=float(cfg.get("endpoint_timeout", 60.0)))
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from None


def _load(path: str):
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file {path}")
    return load(p)


def _diag_fail(exc: DiagnosticError, as_json: bool) -> int:
    if as_json:
        _emit({"diagnostics": [d.to_json() for d in exc.diagnostics]})
    else:
        for d in exc.diagnostics:
            print(d)
    return 1


# -- commands -------------------------------------------------------------------------

def cmd_parse(args, cfg) -> int:
    d = _load(args.file)
    fmt = args.format or ("json" if Path(args.file).suffix == ".eb" else "text")
    sys.stdout.write(serialize(d, fmt).decode())
    return 0


def cmd_check(args, cfg) -> int:
    try:
        d = _load(args.file)
    except DiagnosticError as exc:
        return _diag_fail(exc, args.json)
    diags = well_formed(d)
    if args.json:
        _emit({"diagnostics": [x.to_json() for x in diags]})
    else:
        for x in diags:
            print(x)
    return 1 if errors(diags) else 0


def cmd_po(args, cfg) -> int:
    from ebforge.semantics import development_pos, generate_pos
    d = _load(args.file)
    pos = generate_pos(d, args.machine) if args.machine else development_pos(d)
    if args.json:
        _emit({"obligations": [{"name": p.key, "kind": p.kind, "sequent": p.sequent.text(),
                                "origin": list(p.origin_labels), "refinementPO": p.refinement_po,
                                "gluing": p.gluing} for p in pos]})
    else:
        for p in pos:
            print(f"{p.key}  [{p.kind}]")
            print("  " + p.sequent.text().replace("\n", "\n  "))
    return 0


def _trace_lines(res) -> list[str]:
    out = []
    if res.trace is None:
        return out
    if res.trace.constants:
        out.append("constants: " + ", ".join(f"{k} = {show(v)}"
                                            for k, v in res.trace.constants.items()))
    prev: dict = {}
    for k, st in enumerate(res.trace.steps):
        params = ", ".join(f"{a} = {show(v)}" for a, v in sorted(st.params.items()))
        out.append(f"step {k}: {st.event}" + (f" ({params})" if params else ""))
        for var in st.state:
            before = show(prev[var]) if var in prev else "-"
            out.append(f"    {var:<12} {before:>16}  ->  {show(st.state[var])}")
        prev = st.state
    return out


def cmd_mc(args, cfg) -> int:
    d = _load(args.file)
    name = args.machine or (d.machines[-1].name if d.machines else None)
    if name is None or not d.has_machine(name):
        raise UsageError(f"no machine {name!r}")
    _jobs(args, cfg)
    res = explore(name, d, _bounds(args, cfg), check_deadlock=bool(_setting(args, cfg, "deadlock")))
    if args.json:
        _emit(res.to_json())
    else:
        print(f"{name}: {res.verdict} ({res.states} states)")
        if res.violated:
            print("violated: " + ", ".join(res.violated)
                  + (f" [{', '.join(res.requirements)}]" if res.requirements else ""))
        for line in _trace_lines(res):
            print(line)
    return 0 if res.ok else 1


def cmd_prove(args, cfg) -> int:
    from ebforge.proof import prove_all
    from ebforge.semantics import development_pos, generate_pos
    d = _load(args.file)
    _jobs(args, cfg)
    pos = generate_pos(d, args.machine) if args.machine else development_pos(d)
    store = prove_all(pos, _budget(args, cfg))
    if args.json:
        _emit({"status": store.summary(), "discharged": len(store.discharged()), "total": len(store)})
    else:
        width = max((len(k) for k in store.keys()), default=10)
        for k in [p.key for p in pos]:
            print(f"{k:<{width}}  {store.status[k]}")
        print(f"{len(store.discharged())}/{len(store)} discharged")
    if args.out:
        Path(args.out).write_text(json.dumps(store.to_json(), indent=1, sort_keys=True) + "\n")
    return 0 if not store.open() else 1


def _run_config(args, cfg):
    from ebforge.agent import RunConfig, Validated
    out = _setting(args, cfg, "out")
    return RunConfig(proposer=Validated(_proposer(args, cfg)), bounds=_bounds(args, cfg),
                     limits=_limits(args, cfg), budget=_budget(args, cfg),
                     out=Path(out) if out else None)


def cmd_repair(args, cfg) -> int:
    from ebforge.agent import ProposerError, repair_loop
    from ebforge.frontend.jsonfmt import serialize_json
    d = _load(args.file)
    _jobs(args, cfg)
    rc = _run_config(args, cfg)
    try:
        res = repair_loop(d, rc.proposer, rc)
    except ProposerError as exc:
        print(f"proposer error: {exc}", file=sys.stderr)
        return 1
    if rc.out:
        rc.out.mkdir(parents=True, exist_ok=True)
        (rc.out / "repaired.model.json").write_bytes(serialize_json(res.d))
        (rc.out / "proofs.json").write_text(json.dumps(res.store.to_json(), indent=1, sort_keys=True) + "\n")
        (rc.out / "repairs.jsonl").write_text("".join(r.dumps() + "\n" for r in res.records))
    if args.json:
        _emit({"modelCheck": res.mc_verdict, "status": res.store.summary(),
               "repairs": [r.to_json() for r in res.records]})
    else:
        for r in res.records:
            print(f"#{r.seq} {r.outcome:<16} {r.repair.function_id} {r.po_name}")
        print(f"model checker: {res.mc_verdict}; "
              f"{len(res.store.discharged())}/{len(res.store)} POs discharged")
    return 0 if res.mc_verdict in ("ok", "boundExhausted") and not res.store.open() else 1


def cmd_pipeline(args, cfg) -> int:
    from ebforge.agent import RequirementDoc, run_pipeline
    if not args.requirements:
        raise UsageError("--requirements is required")
    try:
        doc = RequirementDoc.load(args.requirements)
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read requirements: {exc}") from None
    _jobs(args, cfg)
    rc = _run_config(args, cfg)
    if rc.out is None:
        rc.out = Path("run")
    res = run_pipeline(doc, rc)
    m = res.metrics
    if args.json:
        _emit({"ok": res.ok, "failures": res.failures, "metrics": m.to_json() if m else None,
               "out": str(rc.out)})
    else:
        for f in res.failures:
            print(f"failure: {f}")
        if m:
            print(f"pdr={m.pdr:.4f} rc={m.rc:.4f} rf={m.rf:.4f} refinementPdr={m.refinement_pdr:.4f}")
        print(f"artifacts in {rc.out}")
    return 0 if res.ok else 1


def cmd_metrics(args, cfg) -> int:
    from ebforge.agent import RequirementDoc, compute_metrics
    from ebforge.frontend.jsonfmt import parse_json
    run = Path(args.run)
    steps = sorted(run.glob("step-*.model.json"), key=lambda p: int(p.name.split("-")[1].split(".")[0]))
    if not steps or not (run / "proofs.json").exists():
        raise UsageError(f"{run} does not contain step-N.model.json and proofs.json")
    if not args.requirements:
        raise UsageError("--requirements is required")
    doc = RequirementDoc.load(args.requirements)
    d = parse_json(steps[-1].read_bytes())
    proofs = json.loads((run / "proofs.json").read_text())
    status = {e["po"]: e["status"] for e in proofs["entries"]}
    m = compute_metrics(d, status, doc)
    if args.json:
        _emit(m.to_json())
    else:
        print(f"pdr={m.pdr:.4f} rc={m.rc:.4f} rf={m.rf:.4f} refinementPdr={m.refinement_pdr:.4f}")
        for rid, info in m.per_requirement.items():
            state = "fulfilled" if info["fulfilled"] else ("covered" if info["covered"] else "missing")
            print(f"  {rid:<8} {state}  ({len(info['pos'])} POs)")
    return 0 if m.pdr == 1.0 and m.rf == 1.0 else 1


COMMANDS = {"parse": cmd_parse, "check": cmd_check, "po": cmd_po, "mc": cmd_mc, "prove": cmd_prove,
            "repair": cmd_repair, "pipeline": cmd_pipeline, "metrics": cmd_metrics}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=None, help="machine-readable output")
    common.add_argument("--config", help=f"configuration file (default ./{CONFIG_NAME} if present)")
    common.add_argument("--bounds", help="lo,hi,carrier,depth,states")
    common.add_argument("--solver", help="external SMT solver executable")
    common.add_argument("--jobs", type=int, help="worker cap")

    ap = argparse.ArgumentParser(prog="ebforge", description="Event-B modeling, proof and repair")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("parse", "check", "po", "mc", "prove", "repair"):
        sp = sub.add_parser(name, parents=[common])
        sp.add_argument("file")
        if name == "parse":
            sp.add_argument("--format", choices=("json", "text"))
        if name in ("po", "mc", "prove"):
            sp.add_argument("--machine")
        if name == "mc":
            sp.add_argument("--deadlock", action="store_true", default=None)
        if name in ("prove", "repair"):
            sp.add_argument("--out")
        if name == "repair":
            sp.add_argument("--proposer")
            sp.add_argument("--trials", help="synthesis,po,passes")
    sp = sub.add_parser("pipeline", parents=[common])
    sp.add_argument("--requirements")
    sp.add_argument("--proposer")
    sp.add_argument("--trials", help="synthesis,po,passes")
    sp.add_argument("--out")
    sp = sub.add_parser("metrics", parents=[common])
    sp.add_argument("run", help="artifact directory of a pipeline run")
    sp.add_argument("--requirements")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _config(args)
        if args.json is None:
            args.json = bool(cfg.get("json", False))
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"ebforge: {exc}", file=sys.stderr)
        return 2
    except DiagnosticError as exc:
        return _diag_fail(exc, args.json)


if __name__ == "__main__":
    sys.exit(main())
