"""Inline definitions and give every binder a globally unique name.

After expansion a term contains no calls, and the names created at run time
by declarations, conversions and inputs are fixed by the term itself. Two
interleavings that reach the same configuration therefore produce
syntactically equal terms and equally named subsystems.
"""
from __future__ import annotations

import itertools
from typing import Mapping

from ..errors import CQPError
from .ast import (
    Action, And, ApplyUnitary, Binder, Call, Eq, Hole, IfThenElse, Input, Lit, Measure, New,
    Nil, NsDecl, Output, Pair, Par, Plus, Program, PsApply, PsMeasure, QbitDecl, Sum, Unitary, Var,
)

SEP = "@"
MAX_DEPTH = 64


class ExpansionError(CQPError):
    pass


def base_name(name: str) -> str:
    """Source-level name of a possibly renamed identifier."""
    return name.split(SEP, 1)[0]


def subst_expr(e, env: Mapping[str, object]):
    if isinstance(e, Var):
        return env.get(e.name, e)
    if isinstance(e, (Lit, Unitary)):
        return e
    if isinstance(e, (Pair, Plus, Eq, And)):
        return type(e)(subst_expr(e.left, env), subst_expr(e.right, env))
    if isinstance(e, IfThenElse):
        return IfThenElse(subst_expr(e.cond, env), subst_expr(e.then, env), subst_expr(e.orelse, env))
    if isinstance(e, (Measure, PsMeasure)):
        return type(e)(tuple(subst_expr(a, env) for a in e.args))
    if isinstance(e, ApplyUnitary):
        return ApplyUnitary(tuple(subst_expr(a, env) for a in e.targets), subst_expr(e.unitary, env))
    if isinstance(e, PsApply):
        return PsApply(e.first, e.second, subst_expr(e.qubit, env))
    raise TypeError(e)


def substitute(p, env: Mapping[str, object]):
    """Replace free variables by expressions.

    No capture check is made: callers guarantee that binders are unique,
    which holds for every expanded term.
    """
    if not env:
        return p
    if isinstance(p, (Nil, Hole)):
        return p
    if isinstance(p, Par):
        return Par(substitute(p.left, env), substitute(p.right, env))
    if isinstance(p, Sum):
        return Sum(substitute(p.left, env), substitute(p.right, env))
    if isinstance(p, Input):
        return Input(subst_expr(p.chan, env), p.binders, substitute(p.cont, env))
    if isinstance(p, Output):
        return Output(subst_expr(p.chan, env), tuple(subst_expr(e, env) for e in p.payload),
                      substitute(p.cont, env))
    if isinstance(p, Action):
        return Action(subst_expr(p.expr, env), substitute(p.cont, env))
    if isinstance(p, (QbitDecl, NsDecl)):
        return type(p)(p.name, substitute(p.cont, env))
    if isinstance(p, New):
        return New(p.name, p.type, substitute(p.cont, env))
    if isinstance(p, Call):
        return Call(p.name, tuple(subst_expr(a, env) for a in p.args))
    raise TypeError(p)


class _Renamer:
    def __init__(self, program: Program):
        self.program = program
        self.counter = itertools.count(1)

    def fresh(self, name: str) -> str:
        return f"{base_name(name)}{SEP}{next(self.counter)}"

    def bind(self, binder: Binder, env: dict) -> tuple[Binder, dict]:
        new = self.fresh(binder.name)
        return Binder(new, binder.type), {**env, binder.name: Var(new)}

    def proc(self, p, env: dict, depth: int):
        if isinstance(p, (Nil, Hole)):
            return p
        if isinstance(p, Par):
            return Par(self.proc(p.left, env, depth), self.proc(p.right, env, depth))
        if isinstance(p, Sum):
            return Sum(self.proc(p.left, env, depth), self.proc(p.right, env, depth))
        if isinstance(p, Input):
            chan = subst_expr(p.chan, env)
            binders = []
            for b in p.binders:
                nb, env = self.bind(b, env)
                binders.append(nb)
            return Input(chan, tuple(binders), self.proc(p.cont, env, depth))
        if isinstance(p, Output):
            return Output(subst_expr(p.chan, env), tuple(subst_expr(e, env) for e in p.payload),
                          self.proc(p.cont, env, depth))
        if isinstance(p, Action):
            if isinstance(p.expr, PsApply):
                q = subst_expr(p.expr.qubit, env)
                first, env = self.bind(p.expr.first, env)
                second, env = self.bind(p.expr.second, env)
                return Action(PsApply(first, second, q), self.proc(p.cont, env, depth))
            return Action(subst_expr(p.expr, env), self.proc(p.cont, env, depth))
        if isinstance(p, (QbitDecl, NsDecl, New)):
            new = self.fresh(p.name)
            env = {**env, p.name: Var(new)}
            if isinstance(p, New):
                return New(new, p.type, self.proc(p.cont, env, depth))
            return type(p)(new, self.proc(p.cont, env, depth))
        if isinstance(p, Call):
            if depth >= MAX_DEPTH:
                raise ExpansionError(f"definition nesting deeper than {MAX_DEPTH} at {p.name}")
            try:
                d = self.program.definition(p.name)
            except KeyError:
                raise ExpansionError(f"undefined process {p.name!r}") from None
            if len(d.params) != len(p.args):
                raise ExpansionError(f"{p.name} expects {len(d.params)} arguments, got {len(p.args)}")
            args = {b.name: subst_expr(a, env) for b, a in zip(d.params, p.args)}
            return self.proc(d.body, args, depth + 1)
        raise TypeError(p)


def expand(program: Program, entry=None):
    """Return the entry process with calls inlined and binders renamed."""
    return _Renamer(program).proc(program.entry if entry is None else entry, {}, 0)


def free_names(p) -> set[str]:
    """Free identifiers of a process (channels as well as values)."""
    out: set[str] = set()
    _free(p, frozenset(), out)
    return out


def expr_names(e) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (Lit, Unitary)):
        return set()
    if isinstance(e, (Pair, Plus, Eq, And)):
        return expr_names(e.left) | expr_names(e.right)
    if isinstance(e, IfThenElse):
        return expr_names(e.cond) | expr_names(e.then) | expr_names(e.orelse)
    if isinstance(e, (Measure, PsMeasure)):
        return set().union(*(expr_names(a) for a in e.args))
    if isinstance(e, ApplyUnitary):
        return set().union(expr_names(e.unitary), *(expr_names(a) for a in e.targets))
    if isinstance(e, PsApply):
        return expr_names(e.qubit)
    raise TypeError(e)


def _free(p, bound: frozenset, out: set) -> None:
    if isinstance(p, (Nil, Hole)):
        return
    if isinstance(p, (Par, Sum)):
        _free(p.left, bound, out)
        _free(p.right, bound, out)
    elif isinstance(p, Input):
        out |= expr_names(p.chan) - bound
        _free(p.cont, bound | {b.name for b in p.binders}, out)
    elif isinstance(p, Output):
        out |= set().union(expr_names(p.chan), *(expr_names(e) for e in p.payload)) - bound
        _free(p.cont, bound, out)
    elif isinstance(p, Action):
        out |= expr_names(p.expr) - bound
        if isinstance(p.expr, PsApply):
            bound = bound | {p.expr.first.name, p.expr.second.name}
        _free(p.cont, bound, out)
    elif isinstance(p, (QbitDecl, NsDecl, New)):
        _free(p.cont, bound | {p.name}, out)
    elif isinstance(p, Call):
        out |= set().union(*(expr_names(a) for a in p.args)) - bound
    else:
        raise TypeError(p)
