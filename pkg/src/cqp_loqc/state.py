"""Joint pure states over named qubits and Fock modes.

A state is a sparse map from basis tuples to complex amplitudes. Each
position of a basis tuple belongs to one slot of the layout: a qubit slot
holds a bit, a mode slot holds a photon count. Mode counts are truncated at
the layout's photon budget, and no basis vector ever carries more photons
in total than the budget.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DuplicateName,
    InvalidPermutation,
    LayoutMismatch,
    NotNormalized,
    NotUnitary,
    UnknownName,
    WeightMismatch,
)

QUBIT = "qubit"
MODE = "mode"

AMPLITUDE_TOL = 1e-9
DENSITY_TOL = 1e-6
PRUNE = 1e-12

Basis = tuple[int, ...]


@dataclass(frozen=True)
class Slot:
    name: str
    kind: str  # QUBIT or MODE


@dataclass(frozen=True)
class SystemLayout:
    """Ordered named subsystems plus the photon budget shared by all modes."""

    slots: tuple[Slot, ...] = ()
    photon_budget: int = 0

    def __post_init__(self):
        names = [s.name for s in self.slots]
        if len(set(names)) != len(names):
            dup = next(n for n in names if names.count(n) > 1)
            raise DuplicateName(dup)

    @classmethod
    def of(cls, *spec: tuple[str, str], photon_budget: int = 0) -> "SystemLayout":
        return cls(tuple(Slot(n, k) for n, k in spec), photon_budget)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.slots)

    def index(self, name: str) -> int:
        for i, s in enumerate(self.slots):
            if s.name == name:
                return i
        raise UnknownName(name)

    def kind(self, name: str) -> str:
        return self.slots[self.index(name)].kind

    def local_dim(self, name: str) -> int:
        return 2 if self.kind(name) == QUBIT else self.photon_budget + 1

    def __contains__(self, name: str) -> bool:
        return any(s.name == name for s in self.slots)

    def sub(self, names: Sequence[str]) -> "SystemLayout":
        return SystemLayout(tuple(self.slots[self.index(n)] for n in names), self.photon_budget)

    def basis(self) -> list[Basis]:
        """All basis tuples in lexicographic order, respecting the budget."""
        ranges = [range(2) if s.kind == QUBIT else range(self.photon_budget + 1) for s in self.slots]
        out = []
        for key in itertools.product(*ranges):
            if photons(self, key) <= self.photon_budget:
                out.append(key)
        return out


def photons(layout: SystemLayout, key: Basis) -> int:
    return sum(v for s, v in zip(layout.slots, key) if s.kind == MODE)


@dataclass(frozen=True, eq=False)
class JointState:
    """Pure state of all subsystems currently in existence."""

    layout: SystemLayout
    amplitudes: Mapping[Basis, complex]
    _key: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def vacuum(cls) -> "JointState":
        return cls(SystemLayout(), {(): 1.0 + 0j})

    @classmethod
    def from_amplitudes(cls, layout: SystemLayout, amplitudes: Mapping[Basis, complex],
                        tol: float = AMPLITUDE_TOL) -> "JointState":
        """Build a normalized state; the budget becomes the largest photon count."""
        amps = {}
        for key, a in amplitudes.items():
            key = tuple(int(v) for v in key)
            if len(key) != len(layout.slots):
                raise ValueError(f"basis {key} does not match layout of {len(layout.slots)} slots")
            for s, v in zip(layout.slots, key):
                if v < 0 or (s.kind == QUBIT and v > 1):
                    raise ValueError(f"invalid value {v} for {s.kind} {s.name}")
            if abs(a) > PRUNE:
                amps[key] = amps.get(key, 0j) + complex(a)
        norm = sum(abs(a) ** 2 for a in amps.values())
        if abs(norm - 1.0) > tol:
            raise NotNormalized(f"squared norm {norm:.12g}")
        budget = max((photons(layout, k) for k in amps), default=0)
        return cls(SystemLayout(layout.slots, budget), amps)

    @property
    def names(self) -> tuple[str, ...]:
        return self.layout.names

    @property
    def photon_budget(self) -> int:
        return self.layout.photon_budget

    def norm2(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.amplitudes.values()))

    def amplitude(self, values: Mapping[str, int]) -> complex:
        key = tuple(values[n] for n in self.names)
        return self.amplitudes.get(key, 0j)

    def reordered(self, names: Sequence[str]) -> "JointState":
        """Same state with slots listed in the given order."""
        return permute_subsystems(self, [self.layout.index(n) for n in names])

    def key(self) -> tuple:
        """Hashable form, insensitive to slot order and global phase."""
        if self._key is None:
            order = sorted(range(len(self.layout.slots)), key=lambda i: self.layout.slots[i].name)
            slots = tuple((self.layout.slots[i].name, self.layout.slots[i].kind) for i in order)
            items = sorted((tuple(k[i] for i in order), a) for k, a in self.amplitudes.items())
            phase = 1.0
            if items:
                first = items[0][1]
                phase = abs(first) / first
            amps = tuple((k, _round(a * phase)) for k, a in items)
            object.__setattr__(self, "_key", (slots, self.layout.photon_budget, amps))
        return self._key

    def allclose(self, other: "JointState", tol: float = AMPLITUDE_TOL) -> bool:
        """Amplitude-wise comparison after aligning slots by name (phase-sensitive)."""
        if set(self.names) != set(other.names):
            return False
        other = other.reordered(self.names)
        keys = set(self.amplitudes) | set(other.amplitudes)
        return all(abs(self.amplitudes.get(k, 0j) - other.amplitudes.get(k, 0j)) <= tol for k in keys)


def _round(a: complex) -> tuple[float, float]:
    return (round(a.real, 9) + 0.0, round(a.imag, 9) + 0.0)


def inject_photon_pair_state(layout: SystemLayout, amplitudes: Mapping[Basis, complex]) -> JointState:
    """Prepare an externally supplied photonic state on the given layout."""
    return JointState.from_amplitudes(layout, amplitudes)


def _allocate(state: JointState, name: str, kind: str) -> JointState:
    if name in state.layout:
        raise DuplicateName(name)
    layout = SystemLayout(state.layout.slots + (Slot(name, kind),), state.photon_budget)
    return JointState(layout, {k + (0,): a for k, a in state.amplitudes.items()})


def allocate_qubit(state: JointState, name: str) -> JointState:
    """Append a fresh qubit in |0>."""
    return _allocate(state, name, QUBIT)


def allocate_mode(state: JointState, name: str) -> JointState:
    """Append a fresh vacuum mode."""
    return _allocate(state, name, MODE)


def check_unitary(matrix: np.ndarray, tol: float = AMPLITUDE_TOL) -> None:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NotUnitary(f"matrix of shape {m.shape} is not square")
    if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol, rtol=0):
        raise NotUnitary("U^dagger U differs from the identity")


def apply_unitary(state: JointState, targets: Sequence[str], matrix: np.ndarray,
                  check: bool = True) -> JointState:
    """Apply ``matrix`` to the listed subsystems.

    The matrix acts on the product of the targets' local bases in the order
    given, each local basis ordered 0, 1, ... (modes up to the budget).
    """
    idx = [state.layout.index(t) for t in targets]
    if len(set(idx)) != len(idx):
        raise DuplicateName("repeated target")
    dims = [state.layout.local_dim(t) for t in targets]
    size = int(np.prod(dims)) if dims else 1
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (size, size):
        raise NotUnitary(f"matrix shape {m.shape} does not match local dimension {size}")
    if check:
        check_unitary(m)
    strides = [int(np.prod(dims[j + 1:])) for j in range(len(dims))]
    groups: dict[Basis, np.ndarray] = {}
    for key, a in state.amplitudes.items():
        rest = tuple(v for i, v in enumerate(key) if i not in idx)
        vec = groups.get(rest)
        if vec is None:
            vec = groups[rest] = np.zeros(size, dtype=complex)
        vec[sum(key[i] * s for i, s in zip(idx, strides))] += a
    local = list(itertools.product(*(range(d) for d in dims)))
    n = len(state.layout.slots)
    others = [i for i in range(n) if i not in idx]
    out: dict[Basis, complex] = {}
    for rest, vec in groups.items():
        new = m @ vec
        for j in np.flatnonzero(np.abs(new) > PRUNE):
            key = [0] * n
            for i, v in zip(others, rest):
                key[i] = v
            for i, v in zip(idx, local[j]):
                key[i] = v
            key = tuple(key)
            if photons(state.layout, key) > state.photon_budget:
                raise NotUnitary("unitary leaks amplitude above the photon budget")
            out[key] = out.get(key, 0j) + new[j]
    return JointState(state.layout, out)


def permute_subsystems(state: JointState, permutation: Sequence[int]) -> JointState:
    """Reorder slots: new slot i is old slot ``permutation[i]``."""
    n = len(state.layout.slots)
    perm = list(permutation)
    if sorted(perm) != list(range(n)):
        raise InvalidPermutation(f"{perm} is not a permutation of {n} slots")
    layout = SystemLayout(tuple(state.layout.slots[i] for i in perm), state.photon_budget)
    return JointState(layout, {tuple(k[i] for i in perm): a for k, a in state.amplitudes.items()})


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix over the enumerated basis of a sub-layout."""

    layout: SystemLayout
    basis: tuple[Basis, ...]
    matrix: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def entry(self, row: Basis, col: Basis) -> complex:
        index = {b: i for i, b in enumerate(self.basis)}
        if row not in index or col not in index:
            return 0j
        return complex(self.matrix[index[row], index[col]])

    def allclose(self, other: "DensityMatrix", tol: float = DENSITY_TOL) -> bool:
        """Entry-wise comparison with positional slot alignment.

        Slots are matched by position, not by name, so matrices over
        differently named but corresponding subsystems can be compared. Basis
        vectors missing on one side count as zero rows and columns.
        """
        if len(self.layout.slots) != len(other.layout.slots):
            return False
        if [s.kind for s in self.layout.slots] != [s.kind for s in other.layout.slots]:
            return False
        if self.basis == other.basis:
            return bool(np.all(np.abs(self.matrix - other.matrix) <= tol))
        keys = sorted(set(self.basis) | set(other.basis))
        a = _embed(self, keys)
        b = _embed(other, keys)
        return bool(np.all(np.abs(a - b) <= tol))


def _embed(rho: DensityMatrix, keys: list[Basis]) -> np.ndarray:
    pos = {k: i for i, k in enumerate(keys)}
    out = np.zeros((len(keys), len(keys)), dtype=complex)
    idx = [pos[b] for b in rho.basis]
    out[np.ix_(idx, idx)] = rho.matrix
    return out


def reduced_density_matrix(state: JointState, keep: Sequence[str]) -> DensityMatrix:
    """Partial trace over every slot not listed in ``keep`` (kept in that order)."""
    idx = [state.layout.index(n) for n in keep]
    sub = state.layout.sub(keep)
    basis = sub.basis()
    pos = {b: i for i, b in enumerate(basis)}
    groups: dict[Basis, dict[int, complex]] = {}
    for key, a in state.amplitudes.items():
        rest = tuple(v for i, v in enumerate(key) if i not in idx)
        groups.setdefault(rest, {})[pos[tuple(key[i] for i in idx)]] = a
    rho = np.zeros((len(basis), len(basis)), dtype=complex)
    for vec in groups.values():
        items = list(vec.items())
        for i, a in items:
            for j, b in items:
                rho[i, j] += a * b.conjugate()
    return DensityMatrix(sub, tuple(basis), rho)


def mixture_density_matrix(components: Iterable[tuple[float, JointState]],
                           keep: Sequence[str]) -> DensityMatrix:
    """Weighted sum of reduced density matrices of pure components."""
    components = list(components)
    if not components:
        raise WeightMismatch("empty mixture")
    weights = [w for w, _ in components]
    if any(w < -AMPLITUDE_TOL for w in weights) or abs(sum(weights) - 1.0) > AMPLITUDE_TOL:
        raise WeightMismatch(f"weights {weights} are not a probability vector")
    first = components[0][1].layout
    names = set(first.names)
    for _, st in components[1:]:
        if set(st.names) != names:
            raise LayoutMismatch("components disagree on their subsystems")
    total = None
    for w, st in components:
        rho = reduced_density_matrix(st, keep)
        if total is None:
            total = DensityMatrix(rho.layout, rho.basis, w * rho.matrix)
        elif rho.basis == total.basis:
            total = DensityMatrix(total.layout, total.basis, total.matrix + w * rho.matrix)
        else:
            keys = sorted(set(total.basis) | set(rho.basis))
            layout = total.layout if len(total.basis) >= len(rho.basis) else rho.layout
            total = DensityMatrix(layout, tuple(keys), _embed(total, keys) + w * _embed(rho, keys))
    return total
