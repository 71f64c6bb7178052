"""Operational semantics over mixed configurations.

A mixed configuration is a finite list of components ``(weight, state,
term)`` sharing one set of owned names. The component terms differ only in
classical values, so every enabled move can be located on a representative
term and then applied to all components at once. Measurements split
components; output to the environment groups them by the emitted values and
yields a probabilistic configuration with one branch per value tuple.
"""
from __future__ import annotations

import hashlib
import math
from collections import deque
from dataclasses import dataclass, field, fields
from typing import Callable, Iterable, Mapping, Sequence

from . import optics
from .errors import (
    LimitExceeded, OwnershipFault, PostSelectionEmpty, StuckExpression, UnknownName,
)
from .lang.ast import (
    Action, And, ApplyUnitary, Eq, Hole, IfThenElse, Input, Lit, Measure, New, Nil, NsDecl,
    Output, Pair, Par, Plus, Program, PsApply, PsMeasure, QbitDecl, Sum, Unitary, Var, flatten,
    is_value,
)
from .lang.expand import expand, substitute
from .lang.printer import format_expr, format_process
from .state import (
    DensityMatrix, JointState, allocate_mode, allocate_qubit, mixture_density_matrix,
)

WEIGHT_DIGITS = 9


# environment

@dataclass(frozen=True)
class Injection:
    """One message the environment sends: classical values, then names."""

    values: tuple = ()
    names: tuple[str, ...] = ()

    @property
    def payload(self) -> tuple:
        return tuple(self.values) + tuple(self.names)


@dataclass(frozen=True, eq=False)
class EnvironmentSchedule:
    """What the environment holds, what it will send and which channels it reads."""

    state: JointState
    inputs: tuple[tuple[str, tuple[Injection, ...]], ...] = ()
    reads: tuple[str, ...] = ()

    @classmethod
    def create(cls, state: JointState, inputs: Mapping[str, Sequence[Injection]] | None = None,
               reads: Iterable[str] = ()) -> "EnvironmentSchedule":
        inputs = inputs or {}
        return cls(state, tuple((c, tuple(v)) for c, v in inputs.items()), tuple(reads))

    @property
    def channels(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.inputs)

    def pending(self, consumed: Sequence[int], chan: str) -> Injection | None:
        for i, (c, queue) in enumerate(self.inputs):
            if c == chan and consumed[i] < len(queue):
                return queue[consumed[i]]
        return None

    def with_reads(self, extra: Iterable[str]) -> "EnvironmentSchedule":
        reads = list(self.reads)
        for c in extra:
            if c not in reads:
                reads.append(c)
        return EnvironmentSchedule(self.state, self.inputs, tuple(reads))


@dataclass(frozen=True)
class Limits:
    max_nodes: int = 100_000
    max_photons: int = 4


# labels

@dataclass(frozen=True)
class Tau:
    note: str = field(default="", compare=False)

    def key(self) -> tuple:
        return ("tau",)

    def __str__(self) -> str:
        return "tau"


@dataclass(frozen=True)
class InputLabel:
    chan: str
    values: tuple
    names: tuple[str, ...]

    def key(self) -> tuple:
        return ("in", self.chan, self.values, self.names)

    def __str__(self) -> str:
        return f"{self.chan}?{list(self.values) + list(self.names)}"


@dataclass(frozen=True)
class OutputLabel:
    chan: str
    value_set: tuple[tuple, ...]
    names: tuple[str, ...]

    def key(self) -> tuple:
        # emitted names are private to each system; only their number is observable
        return ("out", self.chan, self.value_set, len(self.names))

    def __str__(self) -> str:
        vals = "{" + ", ".join(str(v) for v in self.value_set) + "}"
        return f"{self.chan}!{vals}" + (f"<{len(self.names)} names>" if self.names else "")


@dataclass(frozen=True)
class ProbStep:
    p: float
    values: tuple

    def key(self) -> tuple:
        return ("prob", self.values)

    def __str__(self) -> str:
        return f"~{self.p:.6g} {self.values}"


Label = Tau | InputLabel | OutputLabel | ProbStep


# configurations

@dataclass(frozen=True, eq=False)
class Component:
    weight: float
    state: JointState
    term: object


@dataclass(frozen=True, eq=False)
class MixedConfiguration:
    components: tuple[Component, ...]
    omega: frozenset[str]
    env_names: tuple[str, ...] = ()
    consumed: tuple[int, ...] = ()
    _key: tuple | None = field(default=None, repr=False)

    kind = "mixed"

    @property
    def term(self):
        return self.components[0].term

    @property
    def is_pure(self) -> bool:
        return len(self.components) == 1

    @property
    def layout(self):
        return self.components[0].state.layout

    def key(self) -> tuple:
        if self._key is None:
            comps = sorted(((c.state.key(), round(c.weight, WEIGHT_DIGITS) + 0.0, c.term)
                            for c in self.components), key=lambda x: x[:2])
            if any(a[:2] == b[:2] for a, b in zip(comps, comps[1:])):
                comps.sort(key=_component_order)
            comps = tuple(comps)
            object.__setattr__(self, "_key", ("mixed", tuple(sorted(self.omega)), self.env_names,
                                              self.consumed, comps))
        return self._key

    def density(self, keep: Sequence[str]) -> DensityMatrix:
        return mixture_density_matrix([(c.weight, c.state) for c in self.components], keep)

    def env_density(self) -> DensityMatrix:
        """Reduced density matrix of the names held by the environment."""
        return self.density(self.env_names)

    def is_terminal(self) -> bool:
        return all(isinstance(c.term, Nil) for c in self.components)

    def abstract(self) -> "AbstractView":
        return abstract_terms([c.term for c in self.components])


def _component_order(item):
    state_key, weight, term = item
    return (state_key, weight, format_process(term))


@dataclass(frozen=True)
class Branch:
    p: float
    values: tuple
    config: MixedConfiguration


@dataclass(frozen=True, eq=False)
class ProbabilisticConfiguration:
    branches: tuple[Branch, ...]
    _key: tuple | None = field(default=None, repr=False)

    kind = "prob"

    def key(self) -> tuple:
        if self._key is None:
            object.__setattr__(self, "_key", ("prob", tuple(
                (round(b.p, WEIGHT_DIGITS) + 0.0, b.values, b.config.key()) for b in self.branches)))
        return self._key


@dataclass(frozen=True, eq=False)
class PureConfiguration:
    state: JointState
    omega: frozenset[str]
    term: object

    @property
    def typing(self) -> tuple[tuple[str, str], ...]:
        return tuple((s.name, "Qbit" if s.kind == "qubit" else "NS") for s in self.state.layout.slots)


@dataclass(frozen=True)
class AbstractView:
    """Anti-unified form: one term with placeholders and a value row per component."""

    term: object
    variables: tuple[str, ...]
    rows: tuple[tuple, ...]


def abstract_terms(terms: Sequence) -> AbstractView:
    counter = [0]
    rows: list[list] = [[] for _ in terms]
    names: list[str] = []

    def walk(nodes):
        first = nodes[0]
        if all(n == first for n in nodes):
            return first
        if all(isinstance(n, Lit) for n in nodes) or any(type(n) is not type(first) for n in nodes):
            name = f"lambda{counter[0]}"
            counter[0] += 1
            names.append(name)
            for row, n in zip(rows, nodes):
                row.append(n)
            return Var(name)
        if isinstance(first, tuple):
            return tuple(walk([n[i] for n in nodes]) for i in range(len(first)))
        kwargs = {}
        for f in fields(first):
            vals = [getattr(n, f.name) for n in nodes]
            kwargs[f.name] = walk(vals) if _is_node(vals[0]) else vals[0]
        return type(first)(**kwargs)

    term = walk(list(terms))
    return AbstractView(term, tuple(names), tuple(tuple(r) for r in rows))


def _is_node(x) -> bool:
    return isinstance(x, tuple) or hasattr(x, "__dataclass_fields__")


# moves

@dataclass(frozen=True)
class _Move:
    kind: str  # out, in, eval, act, decl
    path: tuple[str, ...]
    node: object
    restricted: frozenset


def _moves(term, path=(), restricted=frozenset()):
    if isinstance(term, Par):
        yield from _moves(term.left, path + ("L",), restricted)
        yield from _moves(term.right, path + ("R",), restricted)
    elif isinstance(term, Sum):
        yield from _moves(term.left, path + ("SL",), restricted)
        yield from _moves(term.right, path + ("SR",), restricted)
    elif isinstance(term, New):
        yield from _moves(term.cont, path + ("N",), restricted | {term.name})
    elif isinstance(term, Output):
        kind = "out" if all(is_value(e) for e in term.payload) else "eval"
        yield _Move(kind, path, term, restricted)
    elif isinstance(term, Input):
        yield _Move("in", path, term, restricted)
    elif isinstance(term, Action):
        yield _Move("act", path, term, restricted)
    elif isinstance(term, (QbitDecl, NsDecl)):
        yield _Move("decl", path, term, restricted)


def _parallel(p1: tuple, p2: tuple) -> bool:
    """True when two prefix positions sit in different branches of a parallel."""
    for a, b in zip(p1, p2):
        if a != b:
            return {a, b} == {"L", "R"}
    return False


def _par(left, right):
    if isinstance(left, Nil):
        return right
    if isinstance(right, Nil):
        return left
    return Par(left, right)


def _rewrite(term, edits: list[tuple[tuple, Callable]]):
    """Apply each edit's function at its path; a choice on the path is resolved."""
    if len(edits) == 1 and not edits[0][0]:
        return edits[0][1](term)
    if isinstance(term, Par):
        left = [(p[1:], f) for p, f in edits if p[0] == "L"]
        right = [(p[1:], f) for p, f in edits if p[0] == "R"]
        return _par(_rewrite(term.left, left) if left else term.left,
                    _rewrite(term.right, right) if right else term.right)
    if isinstance(term, Sum):
        side = edits[0][0][0]
        branch = term.left if side == "SL" else term.right
        return _rewrite(branch, [(p[1:], f) for p, f in edits])
    if isinstance(term, New):
        body = _rewrite(term.cont, [(p[1:], f) for p, f in edits])
        return body if isinstance(body, Nil) else New(term.name, term.type, body)
    raise AssertionError(f"bad path into {type(term).__name__}")


# expression evaluation

def _to_expr(v):
    if isinstance(v, tuple):
        out = _to_expr(v[-1])
        for x in reversed(v[:-1]):
            out = Pair(_to_expr(x), out)
        return out
    if isinstance(v, str):
        return Var(v)
    if isinstance(v, Unitary):
        return v
    return Lit(v)


def _python_value(e):
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Unitary):
        return e
    if isinstance(e, Pair):
        return (_python_value(e.left), _python_value(e.right))
    raise StuckExpression(f"not a value: {format_expr(e)}")


def _names_of(targets, state: JointState, omega) -> list[str]:
    names = []
    for t in targets:
        for e in flatten(t):
            if not isinstance(e, Var):
                raise StuckExpression(f"not a quantum name: {format_expr(e)}")
            if e.name not in state.layout:
                raise UnknownName(e.name)
            if e.name not in omega:
                raise OwnershipFault(e.name)
            names.append(e.name)
    return names


def apply_gate(state: JointState, u: Unitary, names: Sequence[str]) -> JointState:
    kinds = [state.layout.kind(n) for n in names]
    qubits = all(k == "qubit" for k in kinds)
    modes = all(k == "mode" for k in kinds)
    if u.name in ("B", "R") and modes and len(names) == 2:
        convention = "reflect" if u.name == "B" else "rotate"
        return optics.beam_splitter(state, names[0], names[1], u.param, convention)
    if u.name == "H" and qubits and len(names) == 1:
        return optics.hadamard(state, names[0])
    if u.name == "H" and modes and len(names) == 2:
        return optics.dual_rail_hadamard(state, names[0], names[1])
    if u.name == "CZ" and qubits and len(names) == 2:
        return optics.controlled_z(state, names[0], names[1])
    if u.name == "CZ" and modes and len(names) == 4:
        return optics.dual_rail_cz(state, (names[0], names[1]), (names[2], names[3]))
    if u.name == "U19" and qubits and len(names) == 1:
        return optics.biased_coin_unitary(state, names[0])
    raise StuckExpression(f"{format_expr(u)} cannot act on {list(names)}")


def evaluate(expr, state: JointState, omega) -> list[tuple[float, JointState, object]]:
    """Reduce an expression to values, with all quantum side effects.

    Returns ``(weight, state, value)`` triples. Weights of ordinary
    measurements are outcome probabilities; post-selected measurements
    contribute the raw probability of each retained outcome, so the caller
    must renormalize.
    """
    if is_value(expr):
        return [(1.0, state, _python_value(expr))]
    if isinstance(expr, (Plus, Eq, And, Pair)):
        out = []
        for w1, s1, a in evaluate(expr.left, state, omega):
            for w2, s2, b in evaluate(expr.right, s1, omega):
                out.append((w1 * w2, s2, _binary(expr, a, b)))
        return out
    if isinstance(expr, IfThenElse):
        out = []
        for w1, s1, c in evaluate(expr.cond, state, omega):
            if not isinstance(c, bool):
                raise StuckExpression(f"condition is not a boolean: {c!r}")
            for w2, s2, v in evaluate(expr.then if c else expr.orelse, s1, omega):
                out.append((w1 * w2, s2, v))
        return out
    if isinstance(expr, Measure):
        names = _names_of(expr.args, state, omega)
        return [(o.weight, o.post_state, o.values[0] if len(o.values) == 1 else o.values)
                for o in optics.measure(state, names)]
    if isinstance(expr, PsMeasure):
        names = _names_of(expr.args, state, omega)
        if len(names) != 2:
            raise StuckExpression("psmeasure takes two modes")
        try:
            outcomes = optics.ps_measure_modes(state, names[0], names[1], renormalize=False)
        except PostSelectionEmpty:
            return []
        return [(o.weight, o.post_state, o.values[0]) for o in outcomes]
    if isinstance(expr, ApplyUnitary):
        out = []
        for w, s, u in evaluate(expr.unitary, state, omega):
            if not isinstance(u, Unitary):
                raise StuckExpression(f"not a unitary: {u!r}")
            out.append((w, apply_gate(s, u, _names_of(expr.targets, s, omega)), None))
        return out
    if isinstance(expr, PsApply):
        raise StuckExpression("conversion is only allowed as an action")
    raise StuckExpression(f"cannot evaluate {format_expr(expr)}")


def _binary(expr, a, b):
    if isinstance(expr, Pair):
        return (a, b)
    if isinstance(expr, Eq):
        return type(a) is type(b) and a == b or (_num(a) and _num(b) and a == b)
    if isinstance(expr, Plus):
        if not (_num(a) and _num(b)):
            raise StuckExpression(f"cannot add {a!r} and {b!r}")
        return a + b
    if not (isinstance(a, bool) and isinstance(b, bool)):
        raise StuckExpression(f"'and' needs booleans, got {a!r} and {b!r}")
    return a and b


def _num(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


@dataclass(frozen=True, eq=False)
class ExpressionConfiguration:
    """Weighted states paired with an expression, as used by expression reduction."""

    components: tuple[tuple[float, JointState, object], ...]
    omega: frozenset[str]


def reduce_expression(config: ExpressionConfiguration) -> ExpressionConfiguration:
    """Evaluate every component's expression to a value literal."""
    out = []
    for w, st, e in config.components:
        for w2, s2, v in evaluate(e, st, config.omega):
            out.append((w * w2, s2, _to_expr(v)))
    return ExpressionConfiguration(tuple(_normalized(out)), config.omega)


def _normalized(items):
    total = sum(x[0] for x in items)
    if total <= 1e-14:
        raise PostSelectionEmpty("every component was discarded")
    return [(x[0] / total,) + tuple(x[1:]) for x in items]


# single-component effects

def _local_effects(move: _Move, state: JointState, omega) -> tuple[list, set, set]:
    """Effects of a tau move on one component.

    Returns ``(outcomes, gained, lost)`` where outcomes are
    ``(weight, state, new_prefix_term)``.
    """
    node = move.node
    if move.kind == "decl":
        alloc = allocate_qubit if isinstance(node, QbitDecl) else allocate_mode
        return [(1.0, alloc(state, node.name), node.cont)], {node.name}, set()
    if move.kind == "act":
        e = node.expr
        if isinstance(e, PsApply):
            if not isinstance(e.qubit, Var):
                raise StuckExpression("conversion needs a qubit name")
            q = _names_of([e.qubit], state, omega)[0]
            new = optics.ps_convert(state, q, e.first.name, e.second.name)
            return [(1.0, new, node.cont)], {e.first.name, e.second.name}, {q}
        return [(w, s, node.cont) for w, s, _ in evaluate(e, state, omega)], set(), set()
    if move.kind == "eval":
        results = [(1.0, state, ())]
        for item in node.payload:
            nxt = []
            for w, s, vals in results:
                for w2, s2, v in evaluate(item, s, omega):
                    nxt.append((w * w2, s2, vals + (_to_expr(v),)))
            results = nxt
        return [(w, s, Output(node.chan, vals, node.cont)) for w, s, vals in results], set(), set()
    raise AssertionError(move.kind)


def _split_payload(payload, state: JointState) -> tuple[tuple, tuple[str, ...], tuple]:
    """Classical values, quantum names, and the flat payload of a value list."""
    flat = tuple(x for e in payload for x in flatten(e))
    values, names = [], []
    for e in flat:
        if isinstance(e, Var) and e.name in state.layout:
            names.append(e.name)
        else:
            values.append(_python_value(e))
    return tuple(values), tuple(names), flat


def _merge(items: list[tuple[float, JointState, object]]) -> tuple[Component, ...]:
    merged: dict = {}
    for w, st, term in items:
        k = (st.key(), term)
        if k in merged:
            merged[k][0] += w
        else:
            merged[k] = [w, st, term]
    return tuple(Component(w, st, term) for w, st, term in merged.values())


# transitions

@dataclass(frozen=True, eq=False)
class Transition:
    label: Label
    target: MixedConfiguration | ProbabilisticConfiguration
    rule: str  # tau, com, in, out
    chan: str | None = None
    payload: tuple = ()
    measures: bool = False


def _measures(node) -> bool:
    found = []

    def visit(e):
        if isinstance(e, (Measure, PsMeasure)):
            found.append(e)
        for f in ("cond", "then", "orelse", "left", "right"):
            sub = getattr(e, f, None)
            if sub is not None:
                visit(sub)

    exprs = [node.expr] if isinstance(node, Action) else list(getattr(node, "payload", ()))
    for e in exprs:
        visit(e)
    return bool(found)


def initial_configuration(term, env: EnvironmentSchedule) -> MixedConfiguration:
    return MixedConfiguration((Component(1.0, env.state, term),), frozenset(), env.state.names,
                              tuple(0 for _ in env.inputs))


def _with(config: MixedConfiguration, items, gained=(), lost=(), env_names=None, consumed=None):
    return MixedConfiguration(
        _merge(_normalized(items)),
        (config.omega - set(lost)) | set(gained),
        config.env_names if env_names is None else env_names,
        config.consumed if consumed is None else consumed,
    )


def transitions(config: MixedConfiguration, env: EnvironmentSchedule) -> list[Transition]:
    """All labelled transitions out of a mixed configuration, in a fixed order."""
    moves = list(_moves(config.term))
    out: list[Transition] = []
    for m in moves:
        if m.kind in ("decl", "act", "eval"):
            out.append(_tau(config, m))
    sends = [m for m in moves if m.kind == "out"]
    recvs = [m for m in moves if m.kind == "in"]
    for s in sends:
        for r in recvs:
            if s.node.chan == r.node.chan and _parallel(s.path, r.path):
                t = _com(config, s, r)
                if t is not None:
                    out.append(t)
    for r in recvs:
        chan = r.node.chan.name
        if chan in r.restricted:
            continue
        inj = env.pending(config.consumed, chan)
        if inj is not None and len(inj.payload) == len(r.node.binders):
            out.append(_env_input(config, env, r, inj))
    for s in sends:
        chan = s.node.chan.name
        if chan not in s.restricted and chan in env.reads:
            out.append(_env_output(config, s))
    return out


def _note(m: _Move) -> str:
    if m.kind == "decl":
        return f"new {m.node.name}"
    if m.kind == "act":
        return "{" + format_expr(m.node.expr) + "}"
    return f"eval {m.node.chan.name}"


def _tau(config: MixedConfiguration, m: _Move) -> Transition:
    items, gained, lost = [], set(), set()
    for c in config.components:
        node = _node_at(c.term, m.path)
        local = _Move(m.kind, m.path, node, m.restricted)
        outcomes, gained, lost = _local_effects(local, c.state, config.omega)
        for w, st, prefix in outcomes:
            items.append((c.weight * w, st, _rewrite(c.term, [(m.path, lambda _, p=prefix: p)])))
    target = _with(config, items, gained, lost)
    return Transition(Tau(_note(m)), target, "tau", measures=_measures(m.node))


def _node_at(term, path):
    for step in path:
        if step in ("L", "SL"):
            term = term.left
        elif step in ("R", "SR"):
            term = term.right
        else:
            term = term.cont
    return term


def _com(config: MixedConfiguration, s: _Move, r: _Move) -> Transition | None:
    items = []
    payload_names = None
    for c in config.components:
        send = _node_at(c.term, s.path)
        recv = _node_at(c.term, r.path)
        values, names, flat = _split_payload(send.payload, c.state)
        if len(flat) != len(recv.binders):
            return None
        payload_names = names
        env = {b.name: e for b, e in zip(recv.binders, flat)}
        term = _rewrite(c.term, [(s.path, lambda n: n.cont),
                                 (r.path, lambda n, env=env: substitute(n.cont, env))])
        items.append((c.weight, c.state, term))
    chan = s.node.chan.name
    note = f"com {chan} {list(payload_names)}" if payload_names else f"com {chan}"
    return Transition(Tau(note), _with(config, items), "com", chan, payload_names)


def _env_input(config, env: EnvironmentSchedule, r: _Move, inj: Injection) -> Transition:
    items = []
    flat = [_to_expr(v) for v in inj.values] + [Var(n) for n in inj.names]
    for c in config.components:
        recv = _node_at(c.term, r.path)
        sub = {b.name: e for b, e in zip(recv.binders, flat)}
        items.append((c.weight, c.state, _rewrite(c.term, [(r.path, lambda n, sub=sub: substitute(n.cont, sub))])))
    chan = r.node.chan.name
    consumed = list(config.consumed)
    consumed[env.channels.index(chan)] += 1
    env_names = tuple(n for n in config.env_names if n not in inj.names)
    target = _with(config, items, gained=inj.names, env_names=env_names, consumed=tuple(consumed))
    return Transition(InputLabel(chan, tuple(inj.values), tuple(inj.names)), target, "in", chan, inj.payload)


def _env_output(config: MixedConfiguration, s: _Move) -> Transition:
    groups: dict[tuple, list] = {}
    names: tuple[str, ...] = ()
    for c in config.components:
        send = _node_at(c.term, s.path)
        values, names, _ = _split_payload(send.payload, c.state)
        term = _rewrite(c.term, [(s.path, lambda n: n.cont)])
        groups.setdefault(values, []).append((c.weight, c.state, term))
    omega = config.omega - set(names)
    env_names = config.env_names + tuple(names)
    branches = []
    for values in sorted(groups, key=_value_order):
        items = groups[values]
        p = sum(w for w, _, _ in items)
        branch = MixedConfiguration(_merge([(w / p, st, t) for w, st, t in items]), omega,
                                    env_names, config.consumed)
        branches.append(Branch(p, values, branch))
    chan = s.node.chan.name
    label = OutputLabel(chan, tuple(b.values for b in branches), names)
    return Transition(label, ProbabilisticConfiguration(tuple(branches)), "out", chan, names)


def _value_order(values: tuple):
    return tuple((type(v).__name__, repr(v)) if not _num(v) else ("", f"{v:020d}") for v in values)


def prob_transitions(config: ProbabilisticConfiguration) -> list[Transition]:
    return [Transition(ProbStep(b.p, b.values), b.config, "prob", payload=b.values)
            for b in config.branches]


def step(config, env: EnvironmentSchedule) -> list[Transition]:
    if isinstance(config, ProbabilisticConfiguration):
        return prob_transitions(config)
    return transitions(config, env)


def step_pure(config: PureConfiguration, env: EnvironmentSchedule | None = None
              ) -> list[tuple[Label, PureConfiguration]]:
    """Process-level moves of a pure configuration: visible inputs and outputs
    plus conversions; internal evaluation and communication are left to
    :func:`transitions`."""
    mixed = MixedConfiguration((Component(1.0, config.state, config.term),), config.omega,
                               (), tuple(0 for _ in (env.inputs if env else ())))
    env = env or EnvironmentSchedule(JointState.vacuum())
    out = []
    for m in _moves(config.term):
        chan = getattr(getattr(m.node, "chan", None), "name", None)
        if m.kind == "out" and chan not in m.restricted:
            values, names, _ = _split_payload(m.node.payload, config.state)
            label = OutputLabel(chan, (values,), names)
            out.append((label, PureConfiguration(config.state, config.omega - set(names),
                                                 _rewrite(config.term, [(m.path, lambda n: n.cont)]))))
        elif m.kind == "in" and chan not in m.restricted:
            inj = env.pending(mixed.consumed, chan)
            if inj is not None and len(inj.payload) == len(m.node.binders):
                t = _env_input(mixed, env, m, inj)
                c = t.target.components[0]
                out.append((t.label, PureConfiguration(c.state, t.target.omega, c.term)))
        elif m.kind == "act" and isinstance(m.node.expr, PsApply):
            t = _tau(mixed, m)
            c = t.target.components[0]
            out.append((t.label, PureConfiguration(c.state, t.target.omega, c.term)))
    return out


# exploration

@dataclass(eq=False)
class LTSNode:
    id: str
    config: MixedConfiguration | ProbabilisticConfiguration
    terminal: bool = False
    deadlock: bool = False

    @property
    def kind(self) -> str:
        return self.config.kind


@dataclass(frozen=True, eq=False)
class Edge:
    src: str
    label: Label
    dst: str
    rule: str = ""


@dataclass(eq=False)
class LTSGraph:
    nodes: dict[str, LTSNode]
    edges: list[Edge]
    initial: str
    env: EnvironmentSchedule
    out: dict[str, list[Edge]] = field(default_factory=dict)

    def successors(self, node_id: str) -> list[Edge]:
        return self.out.get(node_id, [])

    def stats(self) -> dict:
        return {"nodes": len(self.nodes), "edges": len(self.edges),
                "probabilistic": sum(1 for n in self.nodes.values() if n.kind == "prob"),
                "deadlocks": sum(1 for n in self.nodes.values() if n.deadlock)}


def node_id(config) -> str:
    text = repr(_printable(config.key()))
    return hashlib.sha1(text.encode()).hexdigest()[:16]


def _printable(x):
    if isinstance(x, tuple):
        return tuple(_printable(i) for i in x)
    if hasattr(x, "__dataclass_fields__"):
        return format_process(x)
    return x


def graph_to_dict(graph: LTSGraph) -> dict:
    """JSON-ready form of an explored graph, ordered by node id."""
    nodes = []
    for nid in sorted(graph.nodes):
        n = graph.nodes[nid]
        item = {"id": nid, "kind": n.kind, "terminal": n.terminal, "deadlock": n.deadlock}
        if isinstance(n.config, MixedConfiguration):
            item["components"] = len(n.config.components)
            item["term"] = format_process(n.config.term)
        nodes.append(item)
    edges = sorted(({"src": e.src, "dst": e.dst, "label": str(e.label), "rule": e.rule}
                    for e in graph.edges), key=lambda d: (d["src"], d["dst"], d["label"], d["rule"]))
    return {"initial": graph.initial, "stats": graph.stats(), "nodes": nodes, "edges": edges}


def load(program: Program | object):
    """Expanded entry term of a program (terms are returned unchanged)."""
    return expand(program) if isinstance(program, Program) else program


def explore(program: Program | object, env: EnvironmentSchedule, limits: Limits = Limits()) -> LTSGraph:
    """Breadth-first construction of the reachable labelled transition system."""
    init = initial_configuration(load(program), env)
    ids: dict[tuple, str] = {}
    nodes: dict[str, LTSNode] = {}
    edges: list[Edge] = []
    out: dict[str, list[Edge]] = {}

    def intern(config) -> tuple[str, bool]:
        k = config.key()
        nid = ids.get(k)
        if nid is not None:
            return nid, False
        nid = node_id(config)
        ids[k] = nid
        nodes[nid] = LTSNode(nid, config)
        if len(nodes) > limits.max_nodes:
            raise LimitExceeded(f"more than {limits.max_nodes} configurations")
        if isinstance(config, MixedConfiguration) and config.layout.photon_budget > limits.max_photons:
            raise LimitExceeded(f"photon budget {config.layout.photon_budget} over {limits.max_photons}")
        return nid, True

    root, _ = intern(init)
    queue = deque([root])
    while queue:
        nid = queue.popleft()
        node = nodes[nid]
        trans = step(node.config, env)
        if not trans:
            node.terminal = node.config.is_terminal()
            node.deadlock = not node.terminal
        for t in trans:
            dst, new = intern(t.target)
            e = Edge(nid, t.label, dst, t.rule)
            edges.append(e)
            out.setdefault(nid, []).append(e)
            if new:
                queue.append(dst)
    return LTSGraph(nodes, edges, root, env, out)


# runs and reports

def output_distribution(graph: LTSGraph, choose: Callable[[str, list[Edge]], Edge] | None = None
                        ) -> dict[tuple, float]:
    """Distribution of per-channel output values under a scheduler.

    At non-probabilistic nodes the scheduler picks one outgoing edge (the
    first by default); probabilistic nodes branch. Outcomes are tuples of
    ``(channel, values)`` sorted by channel, values concatenated in emission
    order.
    """
    choose = choose or (lambda nid, edges: edges[0])
    memo: dict[str, dict[tuple, float]] = {}

    def dist(nid: str) -> dict[tuple, float]:
        if nid in memo:
            return memo[nid]
        edges = graph.successors(nid)
        if not edges:
            res = {(): 1.0}
        else:
            e = choose(nid, edges)
            if isinstance(e.label, OutputLabel):
                res = {}
                for pe in graph.successors(e.dst):
                    for tail, q in dist(pe.dst).items():
                        key = ((e.label.chan, pe.label.values),) + tail
                        res[key] = res.get(key, 0.0) + pe.label.p * q
            else:
                res = dist(e.dst)
        memo[nid] = res
        return res

    final: dict[tuple, float] = {}
    for trace, p in _iterative(dist, graph).items():
        per: dict[str, tuple] = {}
        for chan, values in trace:
            per[chan] = per.get(chan, ()) + tuple(values)
        key = tuple(sorted(per.items()))
        final[key] = final.get(key, 0.0) + p
    return final


def _iterative(dist, graph: LTSGraph):
    # the graph is acyclic; evaluate leaves first to keep recursion shallow
    order = _postorder(graph)
    for nid in order:
        dist(nid)
    return dist(graph.initial)


def _postorder(graph: LTSGraph) -> list[str]:
    seen, order = set(), []
    stack = [(graph.initial, False)]
    while stack:
        nid, done = stack.pop()
        if done:
            order.append(nid)
            continue
        if nid in seen:
            continue
        seen.add(nid)
        stack.append((nid, True))
        for e in graph.successors(nid):
            if e.dst not in seen:
                stack.append((e.dst, False))
    return order


@dataclass(frozen=True)
class RunReport:
    model: str
    distribution: tuple[tuple[tuple, float], ...]
    deadlocks: tuple[str, ...]
    stats: dict

    def probability(self, predicate: Callable[[dict], bool]) -> float:
        return sum(p for outcome, p in self.distribution if predicate(dict(outcome)))

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "terminal_distribution": [
                {"outputs": {c: list(v) for c, v in outcome}, "probability": p}
                for outcome, p in self.distribution
            ],
            "deadlocks": list(self.deadlocks),
            "lts": dict(self.stats),
        }


def run(program, env: EnvironmentSchedule, name: str = "", limits: Limits = Limits()) -> RunReport:
    graph = explore(program, env, limits)
    dist = output_distribution(graph)
    items = tuple(sorted(((k, p) for k, p in dist.items() if p > 1e-15), key=lambda kp: repr(kp[0])))
    deadlocks = tuple(n.id for n in graph.nodes.values() if n.deadlock)
    return RunReport(name, items, deadlocks, graph.stats())


# deterministic execution up to the first measurement

@dataclass(frozen=True)
class ComEvent:
    chan: str
    names: tuple[str, ...]


def run_until_measurement(program, env: EnvironmentSchedule, max_steps: int = 100_000
                          ) -> tuple[MixedConfiguration, list[ComEvent]]:
    """Follow non-measuring moves (first enabled first) until only measuring
    moves or visible outputs remain; returns the configuration and the log of
    internal communications."""
    config = initial_configuration(load(program), env)
    log: list[ComEvent] = []
    for _ in range(max_steps):
        cands = [t for t in transitions(config, env) if t.rule in ("tau", "com", "in") and not t.measures]
        if not cands:
            return config, log
        t = cands[0]
        if t.rule == "com":
            log.append(ComEvent(t.chan, tuple(t.payload)))
        config = t.target
    raise LimitExceeded(f"no quiescent point within {max_steps} steps")
