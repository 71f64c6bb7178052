"""Recursive-descent parser for the ASCII concrete syntax.

Grammar sketch::

    program  := definition*
    definition := NAME [ '(' params ')' ] '=' process
    process  := choice ('|' choice)*
    choice   := prefixed ('+' prefixed)*
    prefixed := '0' | '[' ']' | '(' process ')'
              | '(' 'new' binders ')' prefixed
              | '(' ('qbit' | 'ns') names ')' prefixed
              | NAME '?' '[' binders ']' '.' prefixed
              | NAME '!' '[' exprs ']' '.' prefixed
              | '{' action '}' '.' prefixed
              | NAME '(' exprs ')'

The program's entry point is the definition named ``Main``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from ..errors import CQPSyntaxError
from .ast import (
    And, ApplyUnitary, BaseType, Binder, Call, ChanType, Definition, Eq, Hole, IfThenElse,
    Input, Lit, Measure, New, Nil, NsDecl, OpType, Output, Pair, Par, Plus, Program, PsApply,
    PsMeasure, QbitDecl, Sum, Unitary, Var, Action,
)

KEYWORDS = {
    "new", "qbit", "ns", "measure", "psmeasure", "if", "then", "else", "and",
    "true", "false", "unit", "H", "CZ", "U19", "B", "R", "PS", "Int", "Bit", "Qbit", "NS", "Op",
}

TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<num>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\*=|==|\^\[|[?!\[\](){},.:|+=/])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, name, kw, sym, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, start = 1, 0
    pos = 0
    while pos < len(text):
        m = TOKEN_RE.match(text, pos)
        if m is None:
            raise CQPSyntaxError(f"unexpected character {text[pos]!r}", line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind in ("num", "name", "sym"):
            value = m.group()
            if kind == "name" and value in KEYWORDS:
                kind = "kw"
            if value == "==":
                value = "="
            tokens.append(Token(kind, value, line, m.start() - start + 1))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - start + 1))
    return tokens


class Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    # token helpers

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "kw", "num") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.pos += 1
            return True
        return False

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise CQPSyntaxError(f"{message}, found {found}", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        tok = self.tok
        self.pos += 1
        return tok

    def name(self) -> str:
        if self.tok.kind != "name":
            self.fail("expected a name")
        text = self.tok.text
        self.pos += 1
        return text

    # programs

    def program(self) -> Program:
        defs = []
        entry = None
        seen = set()
        while self.tok.kind != "eof":
            start = self.tok
            d = self.definition()
            if d.name in seen:
                self.fail(f"duplicate definition {d.name!r}", start)
            seen.add(d.name)
            if d.name == "Main":
                if d.params:
                    self.fail("Main takes no parameters", start)
                entry = d.body
            else:
                defs.append(d)
        if entry is None:
            self.fail("missing definition of Main")
        return Program(tuple(defs), entry)

    def definition(self) -> Definition:
        name = self.name()
        params: tuple[Binder, ...] = ()
        if self.accept("("):
            if not self.at(")"):
                params = self.binders()
            self.expect(")")
        self.expect("=")
        return Definition(name, params, self.process())

    # types and binders

    def type(self):
        if self.accept("^["):
            items = [self.type()]
            while self.accept(","):
                items.append(self.type())
            self.expect("]")
            return ChanType(tuple(items))
        if self.accept("Op"):
            self.expect("(")
            if self.tok.kind != "num":
                self.fail("expected an arity")
            n = int(self.tok.text)
            self.pos += 1
            self.expect(")")
            return OpType(n)
        for t in ("Int", "Bit", "Qbit", "NS"):
            if self.accept(t):
                return BaseType(t)
        self.fail("expected a type")

    def binder(self) -> Binder:
        n = self.name()
        return Binder(n, self.type() if self.accept(":") else None)

    def binders(self) -> tuple[Binder, ...]:
        out = [self.binder()]
        while self.accept(","):
            out.append(self.binder())
        return tuple(out)

    # processes

    def process(self):
        left = self.choice()
        while self.accept("|"):
            left = Par(left, self.choice())
        return left

    def choice(self):
        left = self.prefixed()
        while self.accept("+"):
            left = Sum(left, self.prefixed())
        return left

    def prefixed(self):
        tok = self.tok
        if self.accept("0"):
            return Nil()
        if self.at("[") and self.peek().text == "]":
            self.pos += 2
            return Hole()
        if self.accept("("):
            if self.accept("new"):
                binders = self.binders()
                self.expect(")")
                body = self.prefixed()
                for b in reversed(binders):
                    if b.type is not None and not isinstance(b.type, ChanType):
                        self.fail("restricted names must have a channel type", tok)
                    body = New(b.name, b.type, body)
                return body
            for kw, node in (("qbit", QbitDecl), ("ns", NsDecl)):
                if self.accept(kw):
                    names = [self.name()]
                    while self.accept(","):
                        names.append(self.name())
                    self.expect(")")
                    body = self.prefixed()
                    for n in reversed(names):
                        body = node(n, body)
                    return body
            p = self.process()
            self.expect(")")
            return p
        if self.accept("{"):
            action = self.action()
            self.expect("}")
            self.expect(".")
            return Action(action, self.prefixed())
        if tok.kind == "name":
            nxt = self.peek()
            if nxt.text == "(":
                name = self.name()
                self.expect("(")
                args = () if self.at(")") else self.exprs()
                self.expect(")")
                return Call(name, args)
            if nxt.text == "?":
                chan = Var(self.name())
                self.expect("?")
                self.expect("[")
                binders = self.binders()
                self.expect("]")
                self.expect(".")
                return Input(chan, binders, self.prefixed())
            if nxt.text == "!":
                chan = Var(self.name())
                self.expect("!")
                self.expect("[")
                payload = self.exprs()
                self.expect("]")
                self.expect(".")
                return Output(chan, payload, self.prefixed())
            self.fail("expected '?', '!' or '(' after a name", nxt)
        self.fail("expected a process")

    def action(self):
        # {s: NS, t: NS *= PS(q)} needs binders on the left
        if self.tok.kind == "name" and self.peek().text == ":":
            first = self.binder()
            self.expect(",")
            second = self.binder()
            self.expect("*=")
            self.expect("PS")
            self.expect("(")
            q = self.expr()
            self.expect(")")
            return PsApply(first, second, q)
        items = self.exprs()
        if self.accept("*="):
            return ApplyUnitary(items, self.expr())
        if len(items) != 1:
            self.fail("expected '*=' after a target list")
        return items[0]

    # expressions

    def exprs(self) -> tuple:
        out = [self.expr()]
        while self.accept(","):
            out.append(self.expr())
        return tuple(out)

    def expr(self):
        if self.accept("if"):
            c = self.expr()
            self.expect("then")
            t = self.expr()
            self.expect("else")
            return IfThenElse(c, t, self.expr())
        for kw, node in (("measure", Measure), ("psmeasure", PsMeasure)):
            if self.accept(kw):
                args = [self.atom()]
                while self.accept(","):
                    args.append(self.atom())
                return node(tuple(args))
        return self.conj()

    def conj(self):
        left = self.equality()
        while self.accept("and"):
            left = And(left, self.equality())
        return left

    def equality(self):
        left = self.sum()
        if self.accept("="):
            return Eq(left, self.sum())
        return left

    def sum(self):
        left = self.atom()
        while self.accept("+"):
            left = Plus(left, self.atom())
        return left

    def atom(self):
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return Lit(int(tok.text))
        if tok.kind == "name":
            self.pos += 1
            return Var(tok.text)
        if self.accept("true"):
            return Lit(True)
        if self.accept("false"):
            return Lit(False)
        if self.accept("unit"):
            return Lit(None)
        for u in ("H", "CZ", "U19"):
            if self.accept(u):
                return Unitary(u)
        if self.at("B") or self.at("R"):
            name = self.tok.text
            self.pos += 1
            self.expect("[")
            num = self.integer()
            den = 1
            if self.accept("/"):
                den = self.integer()
                if den == 0:
                    self.fail("zero denominator", tok)
            self.expect("]")
            eta = Fraction(num, den)
            if not 0 <= eta <= 1:
                self.fail("transmittance outside [0, 1]", tok)
            return Unitary(name, eta)
        if self.accept("("):
            e = self.expr()
            if self.accept(","):
                e = Pair(e, self.expr())
            self.expect(")")
            return e
        self.fail("expected an expression")

    def integer(self) -> int:
        if self.tok.kind != "num":
            self.fail("expected an integer")
        v = int(self.tok.text)
        self.pos += 1
        return v


def parse(text: str) -> Program:
    """Parse a whole program; raises :class:`CQPSyntaxError` on bad input."""
    return Parser(text).program()


def parse_process(text: str):
    """Parse a single process term (no definitions)."""
    p = Parser(text)
    proc = p.process()
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return proc


def parse_expr(text: str):
    p = Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail("unexpected trailing input")
    return e
