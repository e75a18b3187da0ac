"""ASCII surface syntax for expressions and predicates.

Token table (unicode aliases accepted on input, ASCII always emitted)::

    &  or  not  =>  <=>  !x.P  #x.P  btrue  bfalse  finite(S)
    =  /=  <  <=  >  >=  :  /:  <:
    +  -  *  /  ..  |->  -->  +->  \\/  /\\  \\
    f(x)  f[S]  dom(f)  ran(f)  min(S)  max(S)  card(S)
    {a, b}  {}  NAT  INT  BOOL  TRUE  FALSE
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from ebforge.ast import Expr, Pred, Term


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column


UNICODE = {
    "∧": "&", "∨": "or", "¬": "not", "⇒": "=>", "⇔": "<=>", "≠": "/=", "≤": "<=",
    "≥": ">=", "∈": ":", "∉": "/:", "⊆": "<:", "∀": "!", "∃": "#", "·": ".",
    "↦": "|->", "→": "-->", "⇸": "+->", "∪": "\\/", "∩": "/\\", "∅": "{}",
    "ℕ": "NAT", "ℤ": "INT", "−": "-", "×": "*", "÷": "/", "⊤": "btrue", "⊥": "bfalse",
}

SYMBOLS = [
    "<=>", "|->", "-->", "+->", "=>", "/=", "<=", ">=", "/:", "<:", "\\/", "/\\", "..",
    "{}", ":=", "::", ":|",
    "(", ")", "[", "]", "{", "}", ",", ".", "+", "-", "*", "/", "=", "<", ">", ":", "&",
    "!", "#", "\\", "@",
]

KEYWORDS = {
    "or", "not", "btrue", "bfalse", "finite", "TRUE", "FALSE", "NAT", "INT", "BOOL",
    "dom", "ran", "min", "max", "card",
}

_TOKEN_RE = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<num>\d+)|(?P<id>[A-Za-z_][A-Za-z0-9_]*'?)|(?P<sym>"
    + "|".join(re.escape(s) for s in SYMBOLS) + r")"
)


@dataclass(frozen=True)
class Token:
    kind: str  # num | id | sym | nl | eof
    text: str
    line: int
    column: int


def tokenize(src: str, line: int = 1, column: int = 1, keep_newlines: bool = False) -> list[Token]:
    for u, a in UNICODE.items():
        if u in src:
            src = src.replace(u, f" {a} ")
    out: list[Token] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}", line, column)
        kind = m.lastgroup
        text = m.group()
        if kind == "nl":
            if keep_newlines:
                out.append(Token("nl", text, line, column))
            line += 1
            column = 1
        else:
            if kind != "ws":
                out.append(Token(kind, text, line, column))
            column += len(text)
        pos = m.end()
    out.append(Token("eof", "", line, column))
    return out


REL_OPS = {"=": "equal", "/=": "notEqual", "<": "lt", "<=": "leq", ">": "gt", ">=": "geq",
           ":": "member", "/:": "notMember", "<:": "subset"}
REL_TEXT = {v: k for k, v in REL_OPS.items()}
UNARY_FUNS = {"dom": "dom", "ran": "ran", "min": "min", "max": "max", "card": "card"}


class FormulaParser:
    def __init__(self, tokens: list[Token], pos: int = 0, stop: frozenset[str] = frozenset()):
        self.toks = tokens
        self.pos = pos
        self.stop = stop

    # -- token helpers --
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.peek()
        return t.kind in ("sym", "id") and t.text == text

    def take(self, text: str | None = None) -> Token:
        t = self.peek()
        if text is not None and not (t.kind in ("sym", "id") and t.text == text):
            raise ParseError(f"expected {text!r}, found {t.text or 'end of input'!r}", t.line, t.column)
        self.pos += 1
        return t

    def error(self, what: str):
        t = self.peek()
        return ParseError(f"expected {what}, found {t.text or 'end of input'!r}", t.line, t.column)

    def ident(self) -> str:
        t = self.peek()
        if t.kind != "id" or t.text in KEYWORDS:
            raise self.error("identifier")
        self.pos += 1
        return t.text

    # -- predicates --
    def pred(self) -> Pred:
        return self.iff()

    def quant(self) -> Pred:
        op = "forall" if self.take().text == "!" else "exists"
        names = [self.ident()]
        while self.at(","):
            self.take(",")
            names.append(self.ident())
        self.take(".")
        body = self.pred()
        return Pred(op, (body,), tuple(names))

    def iff(self) -> Pred:
        left = self.imp()
        if self.at("<=>"):
            self.take()
            right = self.imp()
            return Pred("iff", (left, right))
        return left

    def imp(self) -> Pred:
        left = self.disj()
        if self.at("=>"):
            self.take()
            right = self.imp()
            return Pred("implies", (left, right))
        return left

    def disj(self) -> Pred:
        items = [self.conj()]
        while self.at("or"):
            self.take()
            items.append(self.conj())
        return items[0] if len(items) == 1 else Pred("or", tuple(items))

    def conj(self) -> Pred:
        items = [self.unary()]
        while self.at("&"):
            self.take()
            items.append(self.unary())
        return items[0] if len(items) == 1 else Pred("and", tuple(items))

    def unary(self) -> Pred:
        if self.at("not"):
            self.take()
            return Pred("not", (self.unary(),))
        if self.at("!") or self.at("#"):
            return self.quant()
        return self.atom_pred()

    def atom_pred(self) -> Pred:
        if self.at("btrue"):
            self.take()
            return Pred("truth")
        if self.at("bfalse"):
            self.take()
            return Pred("falsity")
        if self.at("finite"):
            self.take()
            self.take("(")
            e = self.expr()
            self.take(")")
            return Pred("finite", (e,))
        start = self.pos
        if self.at("("):
            # either a relation whose left operand starts with '(' or a parenthesised predicate
            try:
                return self.relation()
            except ParseError:
                self.pos = start
            self.take("(")
            p = self.pred()
            self.take(")")
            return p
        return self.relation()

    def relation(self) -> Pred:
        left = self.expr()
        t = self.peek()
        if t.kind == "sym" and t.text in REL_OPS:
            self.take()
            right = self.expr()
            return Pred(REL_OPS[t.text], (left, right))
        raise self.error("relational operator")

    # -- expressions --
    def expr(self) -> Expr:
        left = self.funspace()
        while self.at("|->"):
            self.take()
            left = Expr("pairMaplet", (left, self.funspace()))
        return left

    def funspace(self) -> Expr:
        left = self.setop()
        if self.at("-->") or self.at("+->"):
            op = "totalFun" if self.take().text == "-->" else "partialFun"
            return Expr(op, (left, self.funspace()))
        return left

    def setop(self) -> Expr:
        left = self.rng()
        ops = {"\\/": "union", "/\\": "inter", "\\": "setminus"}
        while self.peek().kind == "sym" and self.peek().text in ops:
            op = ops[self.take().text]
            left = Expr(op, (left, self.rng()))
        return left

    def rng(self) -> Expr:
        left = self.additive()
        if self.at(".."):
            self.take()
            return Expr("range", (left, self.additive()))
        return left

    def additive(self) -> Expr:
        left = self.mult()
        while self.at("+") or self.at("-"):
            op = "add" if self.take().text == "+" else "sub"
            left = Expr(op, (left, self.mult()))
        return left

    def mult(self) -> Expr:
        left = self.unary_minus()
        while self.at("*") or self.at("/"):
            op = "mul" if self.take().text == "*" else "div"
            left = Expr(op, (left, self.unary_minus()))
        return left

    def unary_minus(self) -> Expr:
        if self.at("-"):
            self.take()
            if self.peek().kind == "num":
                return self.postfix(Expr("intLit", (), -int(self.take().text)))
            return Expr("minus", (self.unary_minus(),))
        return self.postfix(self.primary())

    def postfix(self, e: Expr) -> Expr:
        while True:
            if self.at("("):
                self.take()
                arg = self.expr()
                self.take(")")
                e = Expr("apply", (e, arg))
            elif self.at("["):
                self.take()
                arg = self.expr()
                self.take("]")
                e = Expr("image", (e, arg))
            else:
                return e

    def primary(self) -> Expr:
        t = self.peek()
        if t.kind == "num":
            self.take()
            return Expr("intLit", (), int(t.text))
        if t.kind == "id":
            if t.text in UNARY_FUNS:
                self.take()
                self.take("(")
                e = self.expr()
                self.take(")")
                return Expr(UNARY_FUNS[t.text], (e,))
            const = {"TRUE": ("boolLit", True), "FALSE": ("boolLit", False)}
            if t.text in const:
                self.take()
                op, v = const[t.text]
                return Expr(op, (), v)
            sets = {"NAT": "naturals", "INT": "integers", "BOOL": "bools"}
            if t.text in sets:
                self.take()
                return Expr(sets[t.text])
            return Expr("identRef", (), self.ident())
        if self.at("{}"):
            self.take()
            return Expr("emptySet")
        if self.at("{"):
            self.take()
            items = [self.expr()]
            while self.at(","):
                self.take()
                items.append(self.expr())
            self.take("}")
            return Expr("setLit", tuple(items))
        if self.at("("):
            self.take()
            e = self.expr()
            self.take(")")
            return e
        raise self.error("expression")


def _parse(src: str, entry: str, line: int = 1, column: int = 1):
    toks = tokenize(src, line, column)
    p = FormulaParser(toks)
    out = getattr(p, entry)()
    if p.peek().kind != "eof":
        raise p.error("end of formula")
    return out


def parse_pred(src: str, line: int = 1, column: int = 1) -> Pred:
    return _parse(src, "pred", line, column)


def parse_expr(src: str, line: int = 1, column: int = 1) -> Expr:
    return _parse(src, "expr", line, column)


# -- rendering --------------------------------------------------------------

_EXPR_PREC = {
    "pairMaplet": 1, "totalFun": 2, "partialFun": 2, "union": 3, "inter": 3, "setminus": 3,
    "range": 4, "add": 5, "sub": 5, "mul": 6, "div": 6, "minus": 7, "apply": 8, "image": 8,
}
_BIN_TEXT = {
    "pairMaplet": " |-> ", "totalFun": " --> ", "partialFun": " +-> ", "union": " \\/ ",
    "inter": " /\\ ", "setminus": " \\ ", "range": "..", "add": " + ", "sub": " - ",
    "mul": " * ", "div": " / ",
}
_PRED_PREC = {"forall": 0, "exists": 0, "iff": 1, "implies": 2, "or": 3, "and": 4, "not": 5}


def render(t: Term) -> str:
    return _rp(t, 0) if isinstance(t, Pred) else _re(t, 0)


def _re(e: Expr, ctx: int) -> str:
    op = e.op
    if op == "intLit":
        return str(e.value)
    if op == "boolLit":
        return "TRUE" if e.value else "FALSE"
    if op == "identRef":
        return e.value
    if op == "emptySet":
        return "{}"
    if op == "naturals":
        return "NAT"
    if op == "integers":
        return "INT"
    if op == "bools":
        return "BOOL"
    if op in UNARY_FUNS:
        return f"{op}({_re(e.args[0], 0)})"
    if op == "setLit":
        return "{" + ", ".join(_re(a, 0) for a in e.args) + "}"
    prec = _EXPR_PREC[op]
    if op == "minus":
        inner = e.args[0]
        s = "-" + (f"({_re(inner, 0)})" if inner.op == "intLit" or _EXPR_PREC.get(inner.op, 9) < 8
                   else _re(inner, 8))
    elif op == "apply":
        s = f"{_re(e.args[0], 8)}({_re(e.args[1], 0)})"
    elif op == "image":
        s = f"{_re(e.args[0], 8)}[{_re(e.args[1], 0)}]"
    elif op in ("totalFun", "partialFun"):  # right associative
        s = _re(e.args[0], prec + 1) + _BIN_TEXT[op] + _re(e.args[1], prec)
    elif op == "range":
        s = _re(e.args[0], prec + 1) + _BIN_TEXT[op] + _re(e.args[1], prec + 1)
    else:  # left associative
        s = _re(e.args[0], prec) + _BIN_TEXT[op] + _re(e.args[1], prec + 1)
    if op == "minus" and ctx > 7:
        return f"({s})"
    return f"({s})" if prec < ctx else s


def _rp(p: Pred, ctx: int) -> str:
    op = p.op
    if op == "truth":
        return "btrue"
    if op == "falsity":
        return "bfalse"
    if op == "finite":
        return f"finite({_re(p.args[0], 0)})"
    if op in REL_TEXT:
        return f"{_re(p.args[0], 0)} {REL_TEXT[op]} {_re(p.args[1], 0)}"
    prec = _PRED_PREC[op]
    if op in ("forall", "exists"):
        sym = "!" if op == "forall" else "#"
        s = f"{sym}{', '.join(p.value)}. {_rp(p.args[0], 0)}"
        return s if ctx == 0 else f"({s})"
    if op == "not":
        s = "not " + _rp(p.args[0], 6)
    elif op in ("and", "or"):
        joiner = " & " if op == "and" else " or "
        s = joiner.join(_rp(a, 6 if a.op in ("and", "or", "implies", "iff") else prec) for a in p.args)
    elif op == "implies":
        s = _rp(p.args[0], prec + 1) + " => " + _rp(p.args[1], prec)
    else:  # iff
        s = _rp(p.args[0], prec + 1) + " <=> " + _rp(p.args[1], prec + 1)
    return f"({s})" if prec < ctx else s


# -- actions ----------------------------------------------------------------

def parse_action(src: str, line: int = 1, column: int = 1) -> tuple[str, tuple[str, ...], Term]:
    """Parse ``v := E``, ``v :: S`` or ``v1, v2 :| P`` into (kind, variables, body)."""
    toks = tokenize(src, line, column)
    p = FormulaParser(toks)
    names = [p.ident()]
    while p.at(","):
        p.take(",")
        names.append(p.ident())
    t = p.peek()
    if p.at(":|"):
        p.take()
        body = p.pred()
        kind = "becomesSuch"
    elif p.at(":=") or p.at("::"):
        if len(names) != 1:
            raise ParseError("multiple assignment needs ':|'", t.line, t.column)
        kind = "assign" if p.take().text == ":=" else "becomesIn"
        body = p.expr()
    else:
        raise p.error("':=', '::' or ':|'")
    if p.peek().kind != "eof":
        raise p.error("end of action")
    return kind, tuple(names), body


def render_action(kind: str, variables: tuple[str, ...], body: Term) -> str:
    sym = {"assign": ":=", "becomesIn": "::", "becomesSuch": ":|"}[kind]
    return f"{', '.join(variables)} {sym} {render(body)}"
