"""SMT-LIB 2.6 export and external solver invocation.

Integers and booleans are native; carrier sets become uninterpreted sorts.
Set-valued terms are translated through membership, functions through an
uninterpreted function paired with a domain predicate. min and max are
lowered to fresh constants with guarded defining axioms.
"""
from __future__ import annotations

import re
import shlex
import shutil
import subprocess

from ebforge.ast import Expr, Pred, SemType
from ebforge.frontend.formula import render
from ebforge.proof.terms import expr_type
from ebforge.proof.tree import binder_types
from ebforge.semantics import Sequent

TOKEN = re.compile(r"\b(unsat|sat|unknown|timeout)\b")


class UnexportableOperator(ValueError):
    def __init__(self, node, reason: str = ""):
        text = render(node) if hasattr(node, "op") else str(node)
        super().__init__(f"cannot export {text}" + (f": {reason}" if reason else ""))
        self.node = node


def _sym(name: str) -> str:
    return "|" + name + "|" if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_!]*", name) else name


class _Export:
    def __init__(self, types: dict[str, SemType]):
        self.types = dict(types)
        self.sorts: set[str] = set()
        self.decls: dict[str, str] = {}
        self.axioms: list[str] = []
        self.fresh = 0
        self.lowered: dict[Expr, str] = {}

    # sorts
    def sort(self, t: SemType | None, node) -> str:
        if t is None:
            raise UnexportableOperator(node, "type unknown")
        if t.kind == "INT":
            return "Int"
        if t.kind == "BOOL":
            return "Bool"
        if t.kind == "Carrier":
            self.sorts.add(t.name)
            return _sym(t.name)
        raise UnexportableOperator(node, f"no first-order sort for {t}")

    def _var(self, base: str) -> str:
        self.fresh += 1
        return f"{base}!{self.fresh}"

    def _is_fun(self, t: SemType | None) -> bool:
        return t is not None and t.kind == "Pow" and t.args[0].kind == "Pair"

    def ident(self, name: str, node) -> str:
        t = self.types.get(name)
        if t is None:
            raise UnexportableOperator(node, "untyped identifier")
        sym = _sym(name)
        if sym in self.decls:
            return sym
        if self._is_fun(t):
            a, b = t.args[0].args
            sa, sb = self.sort(a, node), self.sort(b, node)
            self.decls[sym] = f"(declare-fun {sym} ({sa}) {sb})"
            self.decls[sym + "_dom"] = f"(declare-fun {_sym(name + '_dom')} ({sa}) Bool)"
        elif t.kind == "Pow":
            if t.args[0].kind == "Carrier" and t.args[0].name == name:
                self.sort(t.args[0], node)
                return sym
            self.decls[sym] = f"(declare-fun {sym} ({self.sort(t.args[0], node)}) Bool)"
        else:
            self.decls[sym] = f"(declare-fun {sym} () {self.sort(t, node)})"
        return sym

    # expressions of first-order sort
    def expr(self, e: Expr, env: dict[str, SemType]) -> str:
        op = e.op
        if op == "intLit":
            return str(e.value) if e.value >= 0 else f"(- {-e.value})"
        if op == "boolLit":
            return "true" if e.value else "false"
        if op == "identRef":
            if e.value in env:
                return _sym(e.value)
            return self.ident(e.value, e)
        if op in ("add", "sub", "mul"):
            sym = {"add": "+", "sub": "-", "mul": "*"}[op]
            return f"({sym} {self.expr(e.args[0], env)} {self.expr(e.args[1], env)})"
        if op == "minus":
            return f"(- {self.expr(e.args[0], env)})"
        if op == "div":
            a, b = self.expr(e.args[0], env), self.expr(e.args[1], env)
            q = f"(div (abs {a}) (abs {b}))"
            return f"(ite (>= (* {a} {b}) 0) {q} (- {q}))"
        if op == "apply":
            f = e.args[0]
            if f.op != "identRef" or f.value in env:
                raise UnexportableOperator(e, "application of a non-identifier")
            return f"({self.ident(f.value, f)} {self.expr(e.args[1], env)})"
        if op in ("min", "max"):
            return self._extremum(e, env)
        if op == "card":
            s = e.args[0]
            if s.op == "range":
                lo, hi = self.expr(s.args[0], env), self.expr(s.args[1], env)
                return f"(ite (<= {lo} {hi}) (+ (- {hi} {lo}) 1) 0)"
            if s.op == "emptySet":
                return "0"
            if s.op == "setLit" and all(a.op == "intLit" for a in s.args):
                return str(len({a.value for a in s.args}))
            raise UnexportableOperator(e, "cardinality bounds unknown")
        raise UnexportableOperator(e)

    def _extremum(self, e: Expr, env) -> str:
        if e in self.lowered:
            return self.lowered[e]
        if env:
            raise UnexportableOperator(e, "extremum under a binder")
        name = self._var(e.op)
        self.decls[name] = f"(declare-fun {_sym(name)} () Int)"
        x, b = self._var("x"), self._var("b")
        s = e.args[0]
        le = "<=" if e.op == "min" else ">="
        ix = {x: _int()}
        nonempty = f"(exists (({x} Int)) {self.mem(var_e(x), s, ix)})"
        bounded = (f"(exists (({b} Int)) (forall (({x} Int)) (=> {self.mem(var_e(x), s, ix)} "
                   f"({le} {b} {x}))))")
        body = (f"(and {self.mem(var_e(name), s, {name: _int()})} (forall (({x} Int)) "
                f"(=> {self.mem(var_e(x), s, ix)} ({le} {_sym(name)} {x}))))")
        self.axioms.append(f"(=> (and {nonempty} {bounded}) {body})")
        self.lowered[e] = _sym(name)
        return _sym(name)

    # membership in set-valued expressions
    def mem(self, x: Expr, s: Expr, env: dict[str, SemType]) -> str:
        op = s.op
        xs = self.expr(x, env) if not _is_var(x, env) else _sym(x.value)
        if op == "range":
            return f"(and (<= {self.expr(s.args[0], env)} {xs}) (<= {xs} {self.expr(s.args[1], env)}))"
        if op == "setLit":
            parts = [f"(= {xs} {self.expr(a, env)})" for a in s.args]
            return parts[0] if len(parts) == 1 else f"(or {' '.join(parts)})"
        if op == "emptySet":
            return "false"
        if op == "naturals":
            return f"(<= 0 {xs})"
        if op in ("integers", "bools"):
            return "true"
        if op == "union":
            return f"(or {self.mem(x, s.args[0], env)} {self.mem(x, s.args[1], env)})"
        if op == "inter":
            return f"(and {self.mem(x, s.args[0], env)} {self.mem(x, s.args[1], env)})"
        if op == "setminus":
            return f"(and {self.mem(x, s.args[0], env)} (not {self.mem(x, s.args[1], env)}))"
        if op == "identRef" and s.value not in env:
            t = self.types.get(s.value)
            if t is not None and t.kind == "Pow" and t.args[0].kind == "Carrier" and t.args[0].name == s.value:
                self.sort(t.args[0], s)
                return "true"
            if self._is_fun(t):
                raise UnexportableOperator(s, "function used as a set of pairs")
            return f"({self.ident(s.value, s)} {xs})"
        if op in ("dom", "ran", "image"):
            f = s.args[0]
            if f.op != "identRef" or not self._is_fun(self.types.get(f.value)):
                raise UnexportableOperator(s)
            fs = self.ident(f.value, f)
            dom = _sym(f.value + "_dom")
            if op == "dom":
                return f"({dom} {xs})"
            a_t = self.types[f.value].args[0].args[0]
            a = self._var("a")
            inner = dict(env)
            inner[a] = a_t
            cond = f"({dom} {a})"
            if op == "image":
                cond = f"(and {cond} {self.mem(var_e(a), s.args[1], inner)})"
            return f"(exists (({a} {self.sort(a_t, s)})) (and {cond} (= ({fs} {a}) {xs})))"
        raise UnexportableOperator(s, "set expression")

    def set_eq(self, a: Expr, b: Expr, env, strict_sub=False, sub=False) -> str:
        t = expr_type(a, {**self.types, **env}) or expr_type(b, {**self.types, **env})
        if t is None or t.kind != "Pow":
            raise UnexportableOperator(a, "set comparison of unknown type")
        x = self._var("x")
        inner = dict(env)
        inner[x] = t.args[0]
        ma, mb = self.mem(var_e(x), a, inner), self.mem(var_e(x), b, inner)
        rel = "=>" if sub else "="
        return f"(forall (({x} {self.sort(t.args[0], a)})) ({rel} {ma} {mb}))"

    # predicates
    def pred(self, p: Pred, env: dict[str, SemType]) -> str:
        op = p.op
        if op == "truth":
            return "true"
        if op == "falsity":
            return "false"
        if op == "not":
            return f"(not {self.pred(p.args[0], env)})"
        if op in ("and", "or"):
            return f"({op} {' '.join(self.pred(a, env) for a in p.args)})"
        if op == "implies":
            return f"(=> {self.pred(p.args[0], env)} {self.pred(p.args[1], env)})"
        if op == "iff":
            return f"(= {self.pred(p.args[0], env)} {self.pred(p.args[1], env)})"
        if op in ("forall", "exists"):
            bt = binder_types(p, {**self.types, **env})
            inner = dict(env)
            binds = []
            for b in p.value:
                if b not in bt:
                    raise UnexportableOperator(p, f"binder {b} untyped")
                inner[b] = bt[b]
                binds.append(f"({_sym(b)} {self.sort(bt[b], p)})")
            return f"({op} ({' '.join(binds)}) {self.pred(p.args[0], inner)})"
        if op in ("lt", "leq", "gt", "geq"):
            sym = {"lt": "<", "leq": "<=", "gt": ">", "geq": ">="}[op]
            return f"({sym} {self.expr(p.args[0], env)} {self.expr(p.args[1], env)})"
        if op in ("equal", "notEqual"):
            a, b = p.args
            t = expr_type(a, {**self.types, **env}) or expr_type(b, {**self.types, **env})
            if t is not None and t.kind == "Pow":
                out = self.set_eq(a, b, env)
            else:
                out = f"(= {self.expr(a, env)} {self.expr(b, env)})"
            return out if op == "equal" else f"(not {out})"
        if op in ("member", "notMember"):
            x, s = p.args
            if s.op in ("totalFun", "partialFun"):
                out = self._fun_member(x, s, env)
            else:
                out = self.mem(x, s, env)
            return out if op == "member" else f"(not {out})"
        if op == "subset":
            return self.set_eq(p.args[0], p.args[1], env, sub=True)
        if op == "finite":
            s = p.args[0]
            t = expr_type(s, {**self.types, **env})
            if s.op in ("range", "setLit", "emptySet"):
                return "true"
            if t is None or t.kind != "Pow" or t.args[0].kind != "INT":
                raise UnexportableOperator(p, "finiteness of a non-integer set")
            lo, hi, x = self._var("lo"), self._var("hi"), self._var("x")
            inner = dict(env)
            inner[x] = t.args[0]
            m = self.mem(var_e(x), s, inner)
            return (f"(exists (({lo} Int) ({hi} Int)) (forall (({x} Int)) "
                    f"(=> {m} (and (<= {lo} {x}) (<= {x} {hi})))))")
        raise UnexportableOperator(p)

    def _fun_member(self, f: Expr, s: Expr, env) -> str:
        if f.op != "identRef" or f.value in env or not self._is_fun(self.types.get(f.value)):
            raise UnexportableOperator(f, "function membership of a non-identifier")
        fs = self.ident(f.value, f)
        dom = _sym(f.value + "_dom")
        a_t = self.types[f.value].args[0].args[0]
        x = self._var("x")
        inner = dict(env)
        inner[x] = a_t
        in_a = self.mem(var_e(x), s.args[0], inner)
        y = Expr("apply", (f, var_e(x)))
        in_b = self.mem(y, s.args[1], inner)
        link = "=" if s.op == "totalFun" else "=>"
        return (f"(forall (({x} {self.sort(a_t, f)})) (and ({link} ({dom} {x}) {in_a}) "
                f"(=> ({dom} {x}) {in_b})))")


def _int() -> SemType:
    from ebforge.ast import INT_T

    return INT_T


def var_e(name: str) -> Expr:
    return Expr("identRef", (), name)


def _is_var(x: Expr, env) -> bool:
    return x.op == "identRef" and x.value in env


def export_smtlib(seq: Sequent) -> str:
    """Script asserting the hypotheses and the negated goal; unsat means valid."""
    ex = _Export(seq.types)
    hyps = [(lab, ex.pred(h, {})) for lab, h in seq.hypotheses]
    goal = ex.pred(seq.goal, {})
    lines = ["(set-logic ALL)"]
    lines += [f"(declare-sort {_sym(s)} 0)" for s in sorted(ex.sorts)]
    lines += [ex.decls[k] for k in sorted(ex.decls)]
    lines += [f"(assert {a})" for a in ex.axioms]
    for lab, h in hyps:
        lines.append(f"; {lab}")
        lines.append(f"(assert {h})")
    lines.append("; goal")
    lines.append(f"(assert (not {goal}))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


def solver_command(solver: str | None) -> list[str] | None:
    spec = solver or "z3"
    cmd = shlex.split(spec)
    exe = shutil.which(cmd[0])
    if exe is None:
        return None
    cmd[0] = exe
    if cmd[0].endswith("z3") and "-in" not in cmd:
        cmd += ["-in", "-smt2"]
    return cmd


def run_solver(script: str, solver: str | None = None, timeout: float = 5.0) -> str:
    cmd = solver_command(solver)
    if cmd is None:
        return "unknown"
    try:
        res = subprocess.run(cmd, input=script, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired:
        return "timeout"
    except OSError:
        return "unknown"
    m = TOKEN.search(res.stdout)
    return m.group(1) if m else "unknown"


def solve_external(seq: Sequent, solver: str | None, solver_id: str = "z3",
                   timeout: float = 5.0) -> str:
    try:
        script = export_smtlib(seq)
    except UnexportableOperator:
        return "unknown"
    return run_solver(script, solver or solver_id, timeout)
