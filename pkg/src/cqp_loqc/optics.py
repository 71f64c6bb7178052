"""Linear-optical components and measurements on joint states.

Beam splitters follow the creation-operator convention

    a_a^dag -> cos(t) a_a^dag + sin(t) a_b^dag
    a_b^dag -> sin(t) a_a^dag - cos(t) a_b^dag

with cos(t)^2 = eta, the transmittance. The minus sign sits on the second
(dark) input port. A rotation variant with the sign on the other path is
available for comparison.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import DomainError, DuplicateName, NotAMode, NotAQubit, PostSelectionEmpty
from .state import MODE, PRUNE, QUBIT, JointState, Slot, SystemLayout, apply_unitary

SQRT_8_9 = math.sqrt(8 / 9)
SQRT_1_9 = math.sqrt(1 / 9)

# Rotation used by the specification to succeed with probability 1/9.
U19 = np.array([[SQRT_8_9, -SQRT_1_9], [SQRT_1_9, SQRT_8_9]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
CZ = np.diag([1, 1, 1, -1]).astype(complex)


@dataclass(frozen=True)
class BeamSplitterParams:
    eta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= float(self.eta) <= 1.0:
            raise ValueError(f"transmittance {self.eta} outside [0, 1]")

    @property
    def theta(self) -> float:
        return math.acos(math.sqrt(float(self.eta)))


@lru_cache(maxsize=None)
def _fock_matrix(mode_map: tuple[tuple[float, float], tuple[float, float]], budget: int) -> np.ndarray:
    """Lift a 2x2 creation-operator map to the truncated two-mode Fock space.

    ``mode_map[i][j]`` is the coefficient of output creation operator j in
    the image of input creation operator i.
    """
    (m00, m01), (m10, m11) = mode_map
    d = budget + 1
    m = np.eye(d * d, dtype=complex)
    for na in range(d):
        for nb in range(d - na):
            col = na * d + nb
            m[:, col] = 0
            norm = math.sqrt(math.factorial(na) * math.factorial(nb))
            for i in range(na + 1):
                for j in range(nb + 1):
                    p = i + j
                    q = (na - i) + (nb - j)
                    coeff = (math.comb(na, i) * math.comb(nb, j)
                             * m00 ** i * m01 ** (na - i) * m10 ** j * m11 ** (nb - j))
                    m[p * d + q, col] += coeff * math.sqrt(math.factorial(p) * math.factorial(q)) / norm
    return m


def _mode_map(eta: float, convention: str):
    c, s = math.sqrt(eta), math.sqrt(1.0 - eta)
    if convention == "reflect":
        return ((c, s), (s, -c))
    if convention == "rotate":
        return ((c, s), (-s, c))
    raise ValueError(f"unknown beam-splitter convention {convention!r}")


def beam_splitter_matrix(eta: float | Fraction, budget: int, convention: str = "reflect") -> np.ndarray:
    """Two-mode unitary on the truncated Fock space, first mode major.

    Columns with more than ``budget`` photons in total are left as the
    identity; they are never populated. The ``rotate`` convention puts the
    minus sign on the first input's reflected path instead of the second
    input's transmitted path.
    """
    BeamSplitterParams(float(eta))
    return _fock_matrix(_mode_map(float(eta), convention), int(budget)).copy()


def _require(state: JointState, names: Sequence[str], kind: str) -> None:
    for n in names:
        if state.layout.kind(n) != kind:
            raise (NotAMode if kind == MODE else NotAQubit)(n)


def beam_splitter(state: JointState, a: str, b: str, eta: float | Fraction,
                  convention: str = "reflect") -> JointState:
    _require(state, (a, b), MODE)
    BeamSplitterParams(float(eta))
    matrix = _fock_matrix(_mode_map(float(eta), convention), state.photon_budget)
    return apply_unitary(state, (a, b), matrix, check=False)


def ps_convert(state: JointState, qubit: str, mode_a: str, mode_b: str) -> JointState:
    """Re-encode a polarization qubit as a photon in one of two fresh modes.

    |0> becomes |1,0> and |1> becomes |0,1>; the qubit slot disappears and
    the photon budget grows by one.
    """
    _require(state, (qubit,), QUBIT)
    for n in (mode_a, mode_b):
        if n in state.layout:
            raise DuplicateName(n)
    if mode_a == mode_b:
        raise DuplicateName(mode_a)
    i = state.layout.index(qubit)
    slots = state.layout.slots[:i] + state.layout.slots[i + 1:] + (Slot(mode_a, MODE), Slot(mode_b, MODE))
    layout = SystemLayout(slots, state.photon_budget + 1)
    amps = {}
    for key, amp in state.amplitudes.items():
        bit = key[i]
        amps[key[:i] + key[i + 1:] + (1 - bit, bit)] = amp
    return JointState(layout, amps)


def _single_photon_pairs(state: JointState, pairs: Sequence[tuple[str, str]]) -> None:
    for a, b in pairs:
        _require(state, (a, b), MODE)
        ia, ib = state.layout.index(a), state.layout.index(b)
        for key in state.amplitudes:
            if key[ia] + key[ib] != 1:
                raise DomainError(f"modes {a},{b} hold {key[ia] + key[ib]} photons")


def dual_rail_hadamard(state: JointState, a: str, b: str) -> JointState:
    """Hadamard on the dual-rail qubit (a, b), realized as a 50:50 beam splitter."""
    _single_photon_pairs(state, [(a, b)])
    return beam_splitter(state, a, b, 0.5)


def dual_rail_cz(state: JointState, control: tuple[str, str], target: tuple[str, str]) -> JointState:
    """Controlled-Z on two dual-rail qubits; the logical 1 of a pair is |0,1>."""
    _single_photon_pairs(state, [control, target])
    c1 = state.layout.index(control[1])
    t1 = state.layout.index(target[1])
    return JointState(state.layout, {k: (-a if k[c1] == 1 and k[t1] == 1 else a)
                                     for k, a in state.amplitudes.items()})


def biased_coin_unitary(state: JointState, qubit: str) -> JointState:
    """Rotate a qubit so that |0> reaches |1> with probability 1/9."""
    _require(state, (qubit,), QUBIT)
    return apply_unitary(state, (qubit,), U19)


def hadamard(state: JointState, qubit: str) -> JointState:
    _require(state, (qubit,), QUBIT)
    return apply_unitary(state, (qubit,), HADAMARD)


def controlled_z(state: JointState, control: str, target: str) -> JointState:
    _require(state, (control, target), QUBIT)
    return apply_unitary(state, (control, target), CZ)


@dataclass(frozen=True, eq=False)
class MeasurementOutcome:
    values: tuple[int, ...]
    weight: float
    post_state: JointState


def _branches(state: JointState, names: Sequence[str]) -> dict[tuple[int, ...], dict]:
    idx = [state.layout.index(n) for n in names]
    out: dict[tuple[int, ...], dict] = {}
    for key, a in state.amplitudes.items():
        out.setdefault(tuple(key[i] for i in idx), {})[key] = a
    return out


def measure(state: JointState, names: Sequence[str]) -> list[MeasurementOutcome]:
    """Projective measurement in the number (or computational) basis.

    Outcomes come back sorted by value tuple; the measured subsystems stay in
    the layout, collapsed to the observed values.
    """
    outcomes = []
    for values, amps in sorted(_branches(state, names).items()):
        w = sum(abs(a) ** 2 for a in amps.values())
        if w <= PRUNE ** 2:
            continue
        scale = 1 / math.sqrt(w)
        outcomes.append(MeasurementOutcome(values, float(w),
                                           JointState(state.layout, {k: a * scale for k, a in amps.items()})))
    return outcomes


def measure_modes(state: JointState, a: str, b: str) -> list[MeasurementOutcome]:
    _require(state, (a, b), MODE)
    return measure(state, (a, b))


def measure_qubits(state: JointState, names: Sequence[str]) -> list[MeasurementOutcome]:
    _require(state, names, QUBIT)
    return measure(state, names)


def ps_measure_modes(state: JointState, a: str, b: str,
                     renormalize: bool = True) -> list[MeasurementOutcome]:
    """Measure two modes keeping only single-photon outcomes.

    The value of an outcome is the photon count of ``b`` (so |1,0> reads 0
    and |0,1> reads 1). With ``renormalize`` the retained weights sum to one;
    without it they are the raw probabilities of the retained outcomes.
    """
    kept = [o for o in measure_modes(state, a, b) if o.values in ((1, 0), (0, 1))]
    total = sum(o.weight for o in kept)
    if total <= PRUNE:
        raise PostSelectionEmpty(f"no single-photon component on {a},{b}")
    scale = 1 / total if renormalize else 1.0
    out = [MeasurementOutcome((o.values[1],), o.weight * scale, o.post_state) for o in kept]
    return sorted(out, key=lambda o: o.values)
