"""Line-oriented keyword syntax for developments.

::

    context C0
      constants n f
      axioms
        @axm1 [EQP-2] n : NAT
    end

    machine M0
      sees C0
      variables j
      invariants
        @inv1 j : NAT
      events
        event INITIALISATION
          then
            @act1 j := 0
        end
    end

Each labeled item occupies one line; its formula runs to the end of the line.
"""
from __future__ import annotations

from ebforge.ast import Action, Context, Development, Event, LabeledPred, Machine
from ebforge.frontend.check import well_formed
from ebforge.frontend.diagnostics import Diagnostic, DiagnosticError, errors
from ebforge.frontend.formula import (
    FormulaParser, ParseError, Token, parse_action, parse_expr, parse_pred, render, render_action, tokenize,
)

SECTION_WORDS = {"extends", "sets", "constants", "axioms", "theorems", "end", "refines", "sees",
                 "variables", "invariants", "variant", "events", "event", "any", "where", "then"}


class _Lines:
    def __init__(self, src: str):
        self.lines = [(i + 1, ln) for i, ln in enumerate(src.split("\n"))]
        self.pos = 0

    def skip_blank(self):
        while self.pos < len(self.lines) and not self.lines[self.pos][1].strip():
            self.pos += 1

    def peek(self) -> tuple[int, str, list[str]] | None:
        self.skip_blank()
        if self.pos >= len(self.lines):
            return None
        no, ln = self.lines[self.pos]
        return no, ln, ln.split()

    def next(self):
        out = self.peek()
        self.pos += 1
        return out

    def eof_error(self, what: str):
        no = self.lines[-1][0] if self.lines else 1
        return ParseError(f"expected {what}, found end of input", no, 1)


def _col(ln: str, word_index: int) -> int:
    """1-based column of the word_index-th whitespace-separated word."""
    col, words = 0, 0
    i = 0
    while i < len(ln):
        while i < len(ln) and ln[i].isspace():
            i += 1
        if i >= len(ln):
            break
        if words == word_index:
            return i + 1
        words += 1
        while i < len(ln) and not ln[i].isspace():
            i += 1
    return len(ln) + 1


class TextParser:
    def __init__(self, src: str):
        self.src = _Lines(src)

    def expect(self, word: str) -> tuple[int, str, list[str]]:
        got = self.src.next()
        if got is None:
            raise self.src.eof_error(repr(word))
        no, ln, words = got
        if words[0] != word:
            raise ParseError(f"expected {word!r}, found {words[0]!r}", no, _col(ln, 0))
        return got

    def at(self, word: str) -> bool:
        got = self.src.peek()
        return got is not None and got[2][0] == word

    def header(self, word: str, nargs: int | None = 1) -> list[str]:
        no, ln, words = self.expect(word)
        args = words[1:]
        if nargs is not None and len(args) != nargs:
            raise ParseError(f"{word!r} takes {nargs} name(s)", no, _col(ln, min(len(words), nargs + 1)))
        return args

    def item(self) -> tuple[str, tuple[str, ...], str, int, int]:
        """Parse ``@label [R1, R2] rest``; returns label, requirements, rest, line, column."""
        no, ln, _ = self.src.next()
        toks = tokenize(ln, no, 1)
        p = FormulaParser(toks)
        p.take("@")
        label = p.ident()
        reqs: list[str] = []
        if p.at("["):
            p.take("[")
            cur = ""
            while not p.at("]"):
                t = p.take()
                if t.kind == "eof":
                    raise ParseError("unterminated requirement list", t.line, t.column)
                if t.text == ",":
                    reqs.append(cur)
                    cur = ""
                else:
                    cur += t.text
            p.take("]")
            if cur:
                reqs.append(cur)
        t = p.peek()
        if t.kind == "eof":
            raise ParseError("missing formula", t.line, t.column)
        return label, tuple(reqs), ln[t.column - 1:], t.line, t.column

    def items(self, kind: str = "pred") -> list:
        out = []
        while self.src.peek() is not None and self.src.peek()[2][0].startswith("@"):
            label, reqs, rest, no, col = self.item()
            if kind == "pred":
                out.append(LabeledPred(label, parse_pred(rest, no, col), reqs))
            else:
                k, names, body = parse_action(rest, no, col)
                kw = {"pred": body} if k == "becomesSuch" else {"expr": body}
                out.append(Action(label, k, names, requirements=reqs, **kw))
        return out

    def names_line(self, word: str) -> tuple[str, ...]:
        return tuple(self.header(word, None))

    def context(self) -> Context:
        (name,) = self.header("context")
        kw: dict = {}
        if self.at("extends"):
            (kw["extends"],) = self.header("extends")
        for sec in ("sets", "constants"):
            if self.at(sec):
                kw[sec] = self.names_line(sec)
        for sec in ("axioms", "theorems"):
            if self.at(sec):
                self.header(sec, 0)
                kw[sec] = tuple(self.items())
        self.expect("end")
        return Context(name, **kw)

    def event(self) -> Event:
        no, ln, words = self.expect("event")
        toks = tokenize(ln, no, 1)
        p = FormulaParser(toks)
        p.take("event")
        name = p.ident()
        refines = None
        reqs: list[str] = []
        if p.at("refines"):
            p.take()
            refines = p.ident()
        if p.at("["):
            p.take("[")
            cur = ""
            while not p.at("]"):
                t = p.take()
                if t.kind == "eof":
                    raise ParseError("unterminated requirement list", t.line, t.column)
                if t.text == ",":
                    reqs.append(cur)
                    cur = ""
                else:
                    cur += t.text
            p.take("]")
            if cur:
                reqs.append(cur)
        if p.peek().kind != "eof":
            raise p.error("end of event header")
        params: tuple[str, ...] = ()
        guards: list = []
        actions: list = []
        if self.at("any"):
            params = self.names_line("any")
        if self.at("where"):
            self.header("where", 0)
            guards = self.items()
        if self.at("then"):
            self.header("then", 0)
            actions = self.items("action")
        self.expect("end")
        return Event(name, params, tuple(guards), tuple(actions), refines, tuple(reqs))

    def machine(self) -> Machine:
        (name,) = self.header("machine")
        kw: dict = {}
        for sec in ("refines", "sees"):
            if self.at(sec):
                (kw[sec],) = self.header(sec)
        if self.at("variables"):
            kw["variables"] = self.names_line("variables")
        if self.at("invariants"):
            self.header("invariants", 0)
            kw["invariants"] = tuple(self.items())
        variants = []
        while self.at("variant"):
            no, ln, _ = self.src.next()
            col = _col(ln, 1)
            variants.append(parse_expr(ln[col - 1:], no, col))
        kw["variants"] = tuple(variants)
        if self.at("theorems"):
            self.header("theorems", 0)
            kw["theorems"] = tuple(self.items())
        self.header("events", 0)
        events = []
        while self.at("event"):
            events.append(self.event())
        self.expect("end")
        return Machine(name, events=tuple(events), **kw)

    def development(self) -> Development:
        ctxs, machines = [], []
        while (got := self.src.peek()) is not None:
            no, ln, words = got
            if words[0] == "context":
                ctxs.append(self.context())
            elif words[0] == "machine":
                machines.append(self.machine())
            else:
                raise ParseError(f"expected 'context' or 'machine', found {words[0]!r}", no, _col(ln, 0))
        return Development(tuple(ctxs), tuple(machines))


def parse_text(src: str, check: bool = True) -> Development:
    try:
        d = TextParser(src).development()
    except ParseError as exc:
        raise DiagnosticError([Diagnostic(f"{exc.line}:{exc.column}", "SYNTAX_ERROR", exc.message,
                                          hint={"line": exc.line, "column": exc.column})]) from None
    except ValueError as exc:
        raise DiagnosticError([Diagnostic("/", "BAD_IDENT", str(exc))]) from None
    if check:
        found = errors(well_formed(d))
        if found:
            raise DiagnosticError(found)
    return d


def _reqs(r) -> str:
    return f" [{', '.join(r)}]" if r else ""


def _items(out: list[str], items, indent: str):
    for i in items:
        out.append(f"{indent}@{i.label}{_reqs(i.requirements)} {render(i.pred)}")


def serialize_text(d: Development) -> str:
    out: list[str] = []
    for c in d.contexts:
        out.append(f"context {c.name}")
        if c.extends:
            out.append(f"  extends {c.extends}")
        if c.sets:
            out.append("  sets " + " ".join(c.sets))
        if c.constants:
            out.append("  constants " + " ".join(c.constants))
        for sec in ("axioms", "theorems"):
            items = getattr(c, sec)
            if items:
                out.append(f"  {sec}")
                _items(out, items, "    ")
        out.append("end")
        out.append("")
    for m in d.machines:
        out.append(f"machine {m.name}")
        if m.refines:
            out.append(f"  refines {m.refines}")
        if m.sees:
            out.append(f"  sees {m.sees}")
        if m.variables:
            out.append("  variables " + " ".join(m.variables))
        if m.invariants:
            out.append("  invariants")
            _items(out, m.invariants, "    ")
        for v in m.variants:
            out.append(f"  variant {render(v)}")
        if m.theorems:
            out.append("  theorems")
            _items(out, m.theorems, "    ")
        out.append("  events")
        for e in m.events:
            head = f"    event {e.name}"
            if e.refines:
                head += f" refines {e.refines}"
            out.append(head + _reqs(e.requirements))
            if e.parameters:
                out.append("      any " + " ".join(e.parameters))
            if e.guards:
                out.append("      where")
                _items(out, e.guards, "        ")
            if e.actions:
                out.append("      then")
                for a in e.actions:
                    body = render_action(a.kind, a.variables, a.formulas()[0])
                    out.append(f"        @{a.label}{_reqs(a.requirements)} {body}")
            out.append("    end")
        out.append("end")
        out.append("")
    return "\n".join(out)
