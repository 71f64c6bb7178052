"""Probabilistic branching bisimilarity between two explored systems.

The check runs signature-based partition refinement on the disjoint union of
the two transition systems. A non-probabilistic node's signature is the set
of (label, target class) pairs it can reach through inert silent steps
(silent steps that stay inside its own class). A probabilistic node's
signature lists, per emitted value tuple, the branch probability, the class
of the branch target and the environment's reduced density matrix there;
probabilities and density matrices are compared within a tolerance.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import ContextError
from .lang.ast import (
    Action, Hole, Input, New, Nil, NsDecl, Output, Par, Program, PsApply, QbitDecl, Sum,
)
from .lang.expand import free_names
from .lang.ownership import check_ownership
from .lang.parser import parse_process
from .semantics import (
    EnvironmentSchedule, InputLabel, LTSGraph, Limits, OutputLabel, ProbStep, Tau, explore,
)
from .state import DENSITY_TOL, DensityMatrix


@dataclass(frozen=True)
class CounterexampleStep:
    side: str  # "A", "B" or "both"
    node: str
    label: str

    def to_dict(self) -> dict:
        return {"side": self.side, "node": self.node, "label": self.label}


@dataclass(eq=False)
class Verdict:
    equivalent: bool
    counterexample: list[CounterexampleStep] | None
    classes: int
    iterations: int
    tolerance: float
    reason: str = ""
    partition: dict[tuple[str, str], int] = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        out = {
            "equivalent": self.equivalent,
            "counterexample": None if self.counterexample is None
            else [s.to_dict() for s in self.counterexample],
            "classes": self.classes,
            "iterations": self.iterations,
            "tolerance": self.tolerance,
        }
        if self.reason:
            out["reason"] = self.reason
        return out


class _Union:
    """Index-based view of two graphs side by side."""

    def __init__(self, a: LTSGraph, b: LTSGraph):
        self.graphs = {"A": a, "B": b}
        self.ids: list[tuple[str, str]] = []
        self.index: dict[tuple[str, str], int] = {}
        for side, g in self.graphs.items():
            for nid in g.nodes:
                self.index[(side, nid)] = len(self.ids)
                self.ids.append((side, nid))
        n = len(self.ids)
        self.is_prob = [False] * n
        self.visible: list[list] = [[] for _ in range(n)]
        self.taus: list[list[int]] = [[] for _ in range(n)]
        self.branches: list[list] = [[] for _ in range(n)]
        self.edges: list[list] = [[] for _ in range(n)]
        for i, (side, nid) in enumerate(self.ids):
            g = self.graphs[side]
            self.is_prob[i] = g.nodes[nid].kind == "prob"
            for e in g.successors(nid):
                j = self.index[(side, e.dst)]
                self.edges[i].append((e.label, j))
                if isinstance(e.label, ProbStep):
                    self.branches[i].append((e.label.values, e.label.p, j))
                elif isinstance(e.label, Tau):
                    self.taus[i].append(j)
                else:
                    self.visible[i].append((e.label.key(), j))
        self.initial = (self.index[("A", a.initial)], self.index[("B", b.initial)])
        self._rho: dict[int, DensityMatrix] = {}
        self.order = self._topological()

    def rho(self, i: int) -> DensityMatrix:
        if i not in self._rho:
            side, nid = self.ids[i]
            self._rho[i] = self.graphs[side].nodes[nid].config.env_density()
        return self._rho[i]

    def _topological(self) -> list[int] | None:
        """Nodes with successors first; None when the union has a cycle."""
        n = len(self.ids)
        state = [0] * n
        order: list[int] = []
        for root in range(n):
            if state[root]:
                continue
            stack = [(root, 0)]
            state[root] = 1
            while stack:
                i, k = stack[-1]
                if k < len(self.edges[i]):
                    stack[-1] = (i, k + 1)
                    j = self.edges[i][k][1]
                    if state[j] == 1:
                        return None
                    if state[j] == 0:
                        state[j] = 1
                        stack.append((j, 0))
                else:
                    state[i] = 2
                    order.append(i)
                    stack.pop()
        return order


def _prob_close(a: list, b: list, u: _Union, tol: float) -> bool:
    for (p1, i1), (p2, i2) in zip(a, b):
        if abs(p1 - p2) > tol:
            return False
        if not u.rho(i1).allclose(u.rho(i2), tol):
            return False
    return True


def _signatures(u: _Union, cls: list[int]) -> list:
    n = len(cls)
    sig: list = [None] * n

    def nd_sig(i: int, inert_from: Iterable[int]) -> frozenset:
        s = {(k, cls[j]) for k, j in u.visible[i]}
        for j in u.taus[i]:
            if cls[j] != cls[i]:
                s.add((("tau",), cls[j]))
        for j in inert_from:
            s |= sig[j]
        return frozenset(s)

    def prob_sig(i: int):
        rows = sorted((values, cls[j], p, j) for values, p, j in u.branches[i])
        exact = tuple((values, c) for values, c, _, _ in rows)
        return ("P", exact), [(p, j) for _, _, p, j in rows]

    if u.order is not None:
        for i in u.order:
            if u.is_prob[i]:
                sig[i] = prob_sig(i)
            else:
                sig[i] = nd_sig(i, [j for j in u.taus[i] if cls[j] == cls[i]])
        return sig
    # cyclic fallback: least fixpoint of the inert closure
    for i in range(n):
        sig[i] = prob_sig(i) if u.is_prob[i] else frozenset()
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if u.is_prob[i]:
                continue
            new = nd_sig(i, [j for j in u.taus[i] if cls[j] == cls[i]])
            if new != sig[i]:
                sig[i] = new
                changed = True
    return sig


def _refine(u: _Union, tol: float) -> tuple[list[int], int]:
    n = len(u.ids)
    cls = [0] * n
    count = 1
    iterations = 0
    while True:
        iterations += 1
        sig = _signatures(u, cls)
        new = [0] * n
        table: dict = {}
        clusters: dict = {}
        fresh = 0
        for i in range(n):
            if u.is_prob[i]:
                exact, floats = sig[i]
                bucket = clusters.setdefault((cls[i], exact), [])
                for rep_floats, cid in bucket:
                    if _prob_close(rep_floats, floats, u, tol):
                        new[i] = cid
                        break
                else:
                    bucket.append((floats, fresh))
                    new[i] = fresh
                    fresh += 1
            else:
                key = (cls[i], sig[i])
                if key not in table:
                    table[key] = fresh
                    fresh += 1
                new[i] = table[key]
        # renumber densely in node order for stable output
        remap: dict[int, int] = {}
        for i in range(n):
            new[i] = remap.setdefault(new[i], len(remap))
        new_count = len(remap)
        if new_count == count:
            return new, iterations
        cls, count = new, new_count


def check_pbb(a: LTSGraph, b: LTSGraph, tol: float = DENSITY_TOL) -> Verdict:
    """Decide whether the initial configurations of two systems are bisimilar."""
    u = _Union(a, b)
    cls, iterations = _refine(u, tol)
    ia, ib = u.initial
    partition = {u.ids[i]: c for i, c in enumerate(cls)}
    classes = len(set(cls))
    if cls[ia] == cls[ib]:
        return Verdict(True, None, classes, iterations, tol, partition=partition)
    steps, reason = _counterexample(u, tol)
    return Verdict(False, steps, classes, iterations, tol, reason, partition)


# counterexamples

def _closure(u: _Union, i: int, memo: dict) -> list[int]:
    if i in memo:
        return memo[i]
    seen = {i}
    order = [i]
    stack = [i]
    while stack:
        k = stack.pop()
        for j in u.taus[k]:
            if j not in seen:
                seen.add(j)
                order.append(j)
                stack.append(j)
    memo[i] = order
    return order


def _weak(u: _Union, i: int, memo: dict) -> list[tuple]:
    """Visible moves reachable through silent steps: (key, label, from, to)."""
    out = []
    for k in _closure(u, i, memo):
        for label, j in u.edges[k]:
            if isinstance(label, (InputLabel, OutputLabel)):
                out.append((label.key(), label, k, j))
    return out


def _same_distribution(u: _Union, pa: int, pb: int, tol: float) -> bool:
    ba = sorted(u.branches[pa])
    bb = sorted(u.branches[pb])
    if [v for v, _, _ in ba] != [v for v, _, _ in bb]:
        return False
    return _prob_close([(p, j) for _, p, j in ba], [(p, j) for _, p, j in bb], u, tol)


def _counterexample(u: _Union, tol: float, max_pairs: int = 200_000
                    ) -> tuple[list[CounterexampleStep], str]:
    memo: dict = {}
    start = u.initial
    queue = deque([(start, [])])
    seen = {start}
    while queue and len(seen) <= max_pairs:
        (a, b), trace = queue.popleft()
        wa = _weak(u, a, memo)
        wb = _weak(u, b, memo)
        for side, mine, theirs, here in (("A", wa, wb, a), ("B", wb, wa, b)):
            keys = {k for k, _, _, _ in theirs}
            for k, label, src, _ in mine:
                if k not in keys:
                    step = CounterexampleStep(side, u.ids[src][1], str(label))
                    return trace + [step], f"{side} can do {label} and the other side cannot"
        for k, label, src_a, dst_a in wa:
            cands = [(s, d) for kk, _, s, d in wb if kk == k]
            if isinstance(label, OutputLabel):
                good = [(s, d) for s, d in cands if _same_distribution(u, dst_a, d, tol)]
                step = CounterexampleStep("both", f"{u.ids[src_a][1]}/{u.ids[cands[0][0]][1]}", str(label))
                if not good:
                    return trace + [step], f"output {label} has different branch probabilities or environment states"
                for _, d in good:
                    for values, p, ja in u.branches[dst_a]:
                        jb = next(j for v, _, j in u.branches[d] if v == values)
                        pair = (ja, jb)
                        if pair not in seen:
                            seen.add(pair)
                            queue.append((pair, trace + [step, CounterexampleStep("both", u.ids[ja][1],
                                                                                   f"~{p:.6g} {values}")]))
            else:
                step = CounterexampleStep("both", u.ids[src_a][1], str(label))
                for _, d in cands:
                    if (dst_a, d) not in seen:
                        seen.add((dst_a, d))
                        queue.append(((dst_a, d), trace + [step]))
    ia, ib = u.initial
    return ([CounterexampleStep("A", u.ids[ia][1], "start"), CounterexampleStep("B", u.ids[ib][1], "start")],
            "the systems have the same weak traces but differ in branching structure")


# direct checks against the relational definition

def mu(graph: LTSGraph, t: str, target) -> float:
    """Probability of moving from ``t`` into ``target`` (a node id or a set of them)."""
    targets = {target} if isinstance(target, str) else set(target)
    node = graph.nodes[t]
    if node.kind == "prob":
        return sum(e.label.p for e in graph.successors(t) if e.dst in targets)
    return 1.0 if t in targets else 0.0


def verify_partition(a: LTSGraph, b: LTSGraph, partition: dict[tuple[str, str], int],
                     tol: float = DENSITY_TOL) -> list[str]:
    """Check the four transfer conditions for every related pair.

    Works from the definition (weak moves via arbitrary silent paths) rather
    than from signatures, so it can confirm a partition computed by
    :func:`check_pbb`. Returns human-readable violations.
    """
    u = _Union(a, b)
    cls = [partition[x] for x in u.ids]
    memo: dict = {}
    reach: dict[int, set] = {}

    def moves(i: int) -> set:
        # (label key, class of source, class of target) over all tau-paths
        if i not in reach:
            s = set()
            for k in _closure(u, i, memo):
                for label, j in u.edges[k]:
                    if not isinstance(label, ProbStep):
                        s.add((label.key(), cls[k], _target_class(u, j, cls)))
            reach[i] = s
        return reach[i]

    members: dict[int, list[int]] = {}
    for i, c in enumerate(cls):
        members.setdefault(c, []).append(i)
    problems = []
    for c, group in members.items():
        for t in group:
            for label, j in u.edges[t]:
                if isinstance(label, ProbStep):
                    continue
                want = (label.key(), c, _target_class(u, j, cls))
                for w in group:
                    if w == t:
                        continue
                    if isinstance(label, Tau) and cls[j] == c:
                        continue
                    if want not in moves(w):
                        problems.append(f"{u.ids[w]} cannot match {label} of {u.ids[t]}")
            if u.is_prob[t]:
                for w in group:
                    if not u.is_prob[w]:
                        problems.append(f"{u.ids[w]} is not probabilistic but {u.ids[t]} is")
                        continue
                    for d in set(cls):
                        mt = sum(p for _, p, j in u.branches[t] if cls[j] == d)
                        mw = sum(p for _, p, j in u.branches[w] if cls[j] == d)
                        if abs(mt - mw) > tol:
                            problems.append(f"mu({u.ids[t]}, class {d}) != mu({u.ids[w]}, class {d})")
    return problems


def _target_class(u: _Union, j: int, cls: list[int]):
    """Class of a move's target; for outputs, the full branch profile."""
    if not u.is_prob[j]:
        return cls[j]
    profile = []
    for values, p, k in sorted(u.branches[j]):
        profile.append((values, round(p, 6), cls[k], _rho_key(u.rho(k))))
    return tuple(profile)


def _rho_key(rho: DensityMatrix) -> tuple:
    return tuple(sorted((b, round(rho.entry(b, c).real, 6) + 0.0, round(rho.entry(b, c).imag, 6) + 0.0)
                        for b in rho.basis for c in rho.basis if abs(rho.entry(b, c)) > 1e-9))


# congruence

def _hole_ok(ctx, guarded: str | None = None) -> int:
    """Count holes, rejecting one under an input or a declaration."""
    if isinstance(ctx, Hole):
        if guarded:
            raise ContextError(f"hole under {guarded}")
        return 1
    if isinstance(ctx, Input):
        return _hole_ok(ctx.cont, "an input prefix")
    if isinstance(ctx, (QbitDecl, NsDecl)):
        return _hole_ok(ctx.cont, "a declaration")
    if isinstance(ctx, Action):
        return _hole_ok(ctx.cont, "a conversion" if isinstance(ctx.expr, PsApply) else guarded)
    if isinstance(ctx, (Par, Sum)):
        return _hole_ok(ctx.left, guarded) + _hole_ok(ctx.right, guarded)
    if isinstance(ctx, (Output, New)):
        return _hole_ok(ctx.cont, guarded)
    return 0


def _fill(ctx, p):
    if isinstance(ctx, Hole):
        return p
    if isinstance(ctx, (Par, Sum)):
        return type(ctx)(_fill(ctx.left, p), _fill(ctx.right, p))
    if isinstance(ctx, Input):
        return Input(ctx.chan, ctx.binders, _fill(ctx.cont, p))
    if isinstance(ctx, Output):
        return Output(ctx.chan, ctx.payload, _fill(ctx.cont, p))
    if isinstance(ctx, Action):
        return Action(ctx.expr, _fill(ctx.cont, p))
    if isinstance(ctx, (QbitDecl, NsDecl)):
        return type(ctx)(ctx.name, _fill(ctx.cont, p))
    if isinstance(ctx, New):
        return New(ctx.name, ctx.type, _fill(ctx.cont, p))
    return ctx


def plug(context, program: Program) -> Program:
    """Place a program's entry process into the hole of a context."""
    if isinstance(context, str):
        context = parse_process(context)
    if _hole_ok(context) != 1:
        raise ContextError("a context needs exactly one hole")
    return Program(program.definitions, _fill(context, program.entry))


def congruence_spot_check(p: Program, q: Program, contexts: Sequence, env: EnvironmentSchedule,
                          tol: float = DENSITY_TOL, limits: Limits = Limits()) -> list[Verdict]:
    """Check C[p] against C[q] for each context; channels the context leaves
    free become environment-read channels."""
    verdicts = []
    for ctx in contexts:
        cp, cq = plug(ctx, p), plug(ctx, q)
        for prog in (cp, cq):
            diags = check_ownership(prog)
            if diags:
                raise ContextError("; ".join(str(d) for d in diags))
        ctx_term = parse_process(ctx) if isinstance(ctx, str) else ctx
        extra = sorted(free_names(_fill(ctx_term, Nil())) - set(env.channels))
        env2 = env.with_reads(extra)
        verdicts.append(check_pbb(explore(cp, env2, limits), explore(cq, env2, limits), tol))
    return verdicts
