"""Static ownership discipline for quantum names.

Each qubit or number-state name must belong to exactly one parallel
component, must not be touched after it has been sent away or converted,
and must be introduced by a binder. The checker runs on the expanded term,
where every binder is unique, and reports source-level names.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ast import (
    Action, And, ApplyUnitary, Call, ChanType, Eq, Hole, IfThenElse, Input, Measure, New, Nil,
    NsDecl, Output, Pair, Par, Plus, Program, PsApply, PsMeasure, QbitDecl, Sum, Var, flatten,
    is_quantum,
)
from .expand import ExpansionError, base_name, expand, expr_names


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # use-after-send, shared, unbound, use-after-conversion, arity, expansion
    name: str
    message: str

    def __str__(self) -> str:
        return self.message


class _Facts:
    """Binder and usage facts gathered in one pass over an expanded term."""

    def __init__(self):
        self.quantum: set[str] = set()
        self.bound: set[str] = set()
        self.channels: set[str] = set()
        self.values: set[str] = set()
        self.chan_types: dict[str, ChanType] = {}
        self.arith: set[str] = set()  # names used as operands of + = and

    def expr(self, e):
        if isinstance(e, (Plus, Eq, And)):
            self.arith |= expr_names(e)
        if isinstance(e, (Measure, PsMeasure)):
            for a in e.args:
                self.quantum |= expr_names(a)
        elif isinstance(e, ApplyUnitary):
            for t in e.targets:
                self.quantum |= expr_names(t)
        elif isinstance(e, PsApply):
            self.quantum |= expr_names(e.qubit)
            self.quantum |= {e.first.name, e.second.name}
            self.bound |= {e.first.name, e.second.name}
        for sub in (getattr(e, f, None) for f in ("cond", "then", "orelse", "left", "right")):
            if sub is not None:
                self.expr(sub)
        self.values |= expr_names(e)

    def proc(self, p):
        if isinstance(p, (Par, Sum)):
            self.proc(p.left)
            self.proc(p.right)
        elif isinstance(p, Input):
            self.channels |= expr_names(p.chan)
            for b in p.binders:
                self.bound.add(b.name)
                if is_quantum(b.type):
                    self.quantum.add(b.name)
            self.proc(p.cont)
        elif isinstance(p, Output):
            self.channels |= expr_names(p.chan)
            for e in p.payload:
                self.expr(e)
            self.proc(p.cont)
        elif isinstance(p, Action):
            self.expr(p.expr)
            self.proc(p.cont)
        elif isinstance(p, (QbitDecl, NsDecl)):
            self.bound.add(p.name)
            self.quantum.add(p.name)
            self.proc(p.cont)
        elif isinstance(p, New):
            self.bound.add(p.name)
            if p.type is not None:
                self.chan_types[p.name] = p.type
            self.proc(p.cont)


def _payload_arity(payload) -> int:
    n = 0
    for e in payload:
        if isinstance(e, Measure):
            n += len(e.args)
        else:
            n += len(flatten(e))
    return n


class _Checker:
    def __init__(self, facts: _Facts):
        self.facts = facts
        self.diags: list[Diagnostic] = []
        self.seen: set[tuple[str, str]] = set()
        # a free name is presumed quantum unless arithmetic shows it is classical
        free_values = facts.values - facts.bound - facts.channels - (facts.arith - facts.quantum)
        self.quantum = facts.quantum | free_values

    def report(self, kind: str, name: str, text: str):
        name = base_name(name)
        if (kind, name) not in self.seen:
            self.seen.add((kind, name))
            self.diags.append(Diagnostic(kind, name, f"{text}: {name}"))

    def qnames(self, e) -> set[str]:
        return expr_names(e) & self.quantum

    def arity(self, chan, count: int):
        if isinstance(chan, Var) and chan.name in self.facts.chan_types:
            expected = len(self.facts.chan_types[chan.name].items)
            if expected != count:
                self.diags.append(Diagnostic("arity", base_name(chan.name),
                                             f"arity mismatch on {base_name(chan.name)}: "
                                             f"expected {expected}, got {count}"))

    def uses(self, p) -> set[str]:
        if isinstance(p, (Nil, Hole)):
            return set()
        if isinstance(p, Par):
            left, right = self.uses(p.left), self.uses(p.right)
            for n in sorted(left & right):
                self.report("shared", n, "shared ownership")
            return left | right
        if isinstance(p, Sum):
            return self.uses(p.left) | self.uses(p.right)
        if isinstance(p, Input):
            self.arity(p.chan, len(p.binders))
            return self.uses(p.cont) - {b.name for b in p.binders}
        if isinstance(p, Output):
            self.arity(p.chan, _payload_arity(p.payload))
            sent = {e.name for item in p.payload for e in flatten(item)
                    if isinstance(e, Var) and e.name in self.quantum}
            inner = set().union(*(self.qnames(e) for e in p.payload))
            after = self.uses(p.cont)
            for n in sorted(sent & after):
                self.report("use-after-send", n, "use after send")
            return inner | after
        if isinstance(p, Action):
            if isinstance(p.expr, PsApply):
                after = self.uses(p.cont) - {p.expr.first.name, p.expr.second.name}
                for n in sorted(self.qnames(p.expr.qubit) & after):
                    self.report("use-after-conversion", n, "use after conversion")
                return self.qnames(p.expr.qubit) | after
            return self.qnames(p.expr) | self.uses(p.cont)
        if isinstance(p, (QbitDecl, NsDecl)):
            return self.uses(p.cont) - {p.name}
        if isinstance(p, New):
            return self.uses(p.cont)
        if isinstance(p, Call):
            raise AssertionError("calls are expanded before checking")
        raise TypeError(p)


def check_ownership(program: Program, entry=None) -> list[Diagnostic]:
    """Return ownership diagnostics for a program; an empty list means it passed."""
    try:
        term = expand(program, entry)
    except ExpansionError as exc:
        return [Diagnostic("expansion", "", str(exc))]
    facts = _Facts()
    facts.proc(term)
    checker = _Checker(facts)
    checker.uses(term)
    for n in sorted(facts.values - facts.bound - facts.channels):
        checker.report("unbound", n, "unbound quantum variable" if n in checker.quantum else "unbound variable")
    return checker.diags
