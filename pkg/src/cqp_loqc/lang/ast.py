"""Abstract syntax of the process calculus.

All nodes are frozen dataclasses so terms can be hashed and compared
structurally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union


# types

@dataclass(frozen=True)
class BaseType:
    name: str  # Int, Bit, Qbit or NS

    def is_quantum(self) -> bool:
        return self.name in ("Qbit", "NS")


@dataclass(frozen=True)
class ChanType:
    items: tuple["Type", ...]


@dataclass(frozen=True)
class OpType:
    arity: int


Type = Union[BaseType, ChanType, OpType]

INT = BaseType("Int")
BIT = BaseType("Bit")
QBIT = BaseType("Qbit")
NS = BaseType("NS")


def is_quantum(t: Type | None) -> bool:
    return isinstance(t, BaseType) and t.is_quantum()


# expressions

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True, eq=False)
class Lit:
    value: int | bool | None  # None is the unit value

    # True == 1 in Python, but the literals true and 1 are different terms
    def __eq__(self, other):
        return (isinstance(other, Lit) and type(self.value) is type(other.value)
                and self.value == other.value)

    def __hash__(self):
        return hash((Lit, type(self.value).__name__, self.value))


@dataclass(frozen=True)
class Unitary:
    name: str  # H, CZ, U19, B (beam splitter) or R (rotation-convention splitter)
    param: Fraction | None = None


@dataclass(frozen=True)
class Pair:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Plus:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Eq:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class And:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class IfThenElse:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


@dataclass(frozen=True)
class Measure:
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class PsMeasure:
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class ApplyUnitary:
    targets: tuple["Expr", ...]
    unitary: "Expr"


@dataclass(frozen=True)
class PsApply:
    """Polarization-to-spatial conversion binding two fresh modes."""

    first: "Binder"
    second: "Binder"
    qubit: "Expr"


Expr = Union[Var, Lit, Unitary, Pair, Plus, Eq, And, IfThenElse, Measure, PsMeasure, ApplyUnitary, PsApply]


@dataclass(frozen=True)
class Binder:
    name: str
    type: Type | None = None


# processes

@dataclass(frozen=True)
class Nil:
    pass


@dataclass(frozen=True)
class Hole:
    pass


@dataclass(frozen=True)
class Par:
    left: "Process"
    right: "Process"


@dataclass(frozen=True)
class Sum:
    left: "Process"
    right: "Process"


@dataclass(frozen=True)
class Input:
    chan: Expr
    binders: tuple[Binder, ...]
    cont: "Process"


@dataclass(frozen=True)
class Output:
    chan: Expr
    payload: tuple[Expr, ...]
    cont: "Process"


@dataclass(frozen=True)
class Action:
    expr: Expr
    cont: "Process"


@dataclass(frozen=True)
class QbitDecl:
    name: str
    cont: "Process"


@dataclass(frozen=True)
class NsDecl:
    name: str
    cont: "Process"


@dataclass(frozen=True)
class New:
    name: str
    type: ChanType | None
    cont: "Process"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Expr, ...]


Process = Union[Nil, Hole, Par, Sum, Input, Output, Action, QbitDecl, NsDecl, New, Call]

NIL = Nil()


@dataclass(frozen=True)
class Definition:
    name: str
    params: tuple[Binder, ...]
    body: Process


@dataclass(frozen=True)
class Program:
    """Named definitions plus the body of ``Main``."""

    definitions: tuple[Definition, ...]
    entry: Process
    _index: dict = field(default=None, repr=False, compare=False, hash=False)

    def definition(self, name: str) -> Definition:
        if self._index is None:
            object.__setattr__(self, "_index", {d.name: d for d in self.definitions})
        return self._index[name]

    def names(self) -> list[str]:
        return [d.name for d in self.definitions]


def par(*procs: Process) -> Process:
    """Left-nested parallel composition of one or more processes."""
    out = procs[0]
    for p in procs[1:]:
        out = Par(out, p)
    return out


def is_value(e: Expr) -> bool:
    if isinstance(e, (Lit, Var, Unitary)):
        return True
    if isinstance(e, Pair):
        return is_value(e.left) and is_value(e.right)
    return False


def flatten(e: Expr) -> tuple[Expr, ...]:
    """Spread nested pairs into a flat tuple of components."""
    if isinstance(e, Pair):
        return flatten(e.left) + flatten(e.right)
    return (e,)


def children(p: Process) -> tuple[Process, ...]:
    if isinstance(p, (Par, Sum)):
        return (p.left, p.right)
    if isinstance(p, (Input, Output, Action, QbitDecl, NsDecl, New)):
        return (p.cont,)
    return ()
