import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqp_loqc import optics
from cqp_loqc.errors import DomainError, DuplicateName, NotAMode, NotAQubit, PostSelectionEmpty
from cqp_loqc.state import JointState, SystemLayout, check_unitary

from oracles import two_mode_unitary

ETAS = [0.0, 1 / 3, 0.5, 2 / 3, 1.0, 0.123]


def two_modes(amps, budget=None):
    layout = SystemLayout.of(("a", "mode"), ("b", "mode"))
    s = JointState.from_amplitudes(layout, amps)
    if budget is not None:
        s = JointState(SystemLayout(layout.slots, budget), s.amplitudes)
    return s


@pytest.mark.parametrize("eta", ETAS)
@pytest.mark.parametrize("budget", [1, 2, 3])
@pytest.mark.parametrize("convention", ["reflect", "rotate"])
def test_beam_splitter_matches_exponential_oracle(eta, budget, convention):
    m = optics.beam_splitter_matrix(eta, budget, convention)
    check_unitary(m)
    ref = two_mode_unitary(eta, d=budget + 1, convention=convention)
    d = budget + 1
    sector = [p * d + q for p in range(d) for q in range(d) if p + q <= budget]
    assert np.allclose(m[np.ix_(sector, sector)], ref[np.ix_(sector, sector)], atol=1e-12)


def test_single_photon_convention():
    c, s = math.sqrt(1 / 3), math.sqrt(2 / 3)
    out = optics.beam_splitter(two_modes({(1, 0): 1}), "a", "b", 1 / 3)
    assert out.amplitudes[(1, 0)] == pytest.approx(c)
    assert out.amplitudes[(0, 1)] == pytest.approx(s)
    out = optics.beam_splitter(two_modes({(0, 1): 1}), "a", "b", 1 / 3)
    assert out.amplitudes[(1, 0)] == pytest.approx(s)
    assert out.amplitudes[(0, 1)] == pytest.approx(-c)
    out = optics.beam_splitter(two_modes({(0, 1): 1}), "a", "b", 1 / 3, "rotate")
    assert out.amplitudes[(1, 0)] == pytest.approx(-s)
    assert out.amplitudes[(0, 1)] == pytest.approx(c)


def test_hong_ou_mandel_zero_coincidence():
    out = optics.beam_splitter(two_modes({(1, 1): 1}), "a", "b", 0.5)
    assert abs(out.amplitudes.get((1, 1), 0)) < 1e-12
    assert abs(out.amplitudes[(2, 0)]) ** 2 == pytest.approx(0.5)
    assert abs(out.amplitudes[(0, 2)]) ** 2 == pytest.approx(0.5)
    coincidences = [o for o in optics.measure_modes(out, "a", "b") if o.values == (1, 1)]
    assert coincidences == []


@settings(max_examples=200)
@given(st.floats(0, 1), st.integers(0, 2 ** 31 - 1))
def test_beam_splitter_preserves_norm_and_photon_number(eta, seed):
    rng = np.random.default_rng(seed)
    keys = [(p, q) for p in range(4) for q in range(4) if p + q <= 3]
    v = rng.normal(size=len(keys)) + 1j * rng.normal(size=len(keys))
    v /= np.linalg.norm(v)
    s = two_modes(dict(zip(keys, v)), budget=3)
    out = optics.beam_splitter(s, "a", "b", eta)
    assert out.norm2() == pytest.approx(1.0, abs=1e-9)
    for n in range(4):
        w_in = sum(abs(a) ** 2 for k, a in s.amplitudes.items() if sum(k) == n)
        w_out = sum(abs(a) ** 2 for k, a in out.amplitudes.items() if sum(k) == n)
        assert w_out == pytest.approx(w_in, abs=1e-9)


def test_beam_splitter_requires_modes():
    s = JointState.from_amplitudes(SystemLayout.of(("q", "qubit"), ("b", "mode")), {(0, 1): 1})
    with pytest.raises(NotAMode):
        optics.beam_splitter(s, "q", "b", 0.5)
    with pytest.raises(ValueError):
        optics.beam_splitter_matrix(1.5, 2)


def test_ps_convert_encoding_and_budget():
    layout = SystemLayout.of(("q", "qubit"))
    s = JointState.from_amplitudes(layout, {(0,): 0.6, (1,): 0.8})
    out = optics.ps_convert(s, "q", "h", "v")
    assert out.names == ("h", "v")
    assert out.photon_budget == 1
    assert out.amplitudes == {(1, 0): 0.6, (0, 1): 0.8}
    with pytest.raises(NotAQubit):
        optics.ps_convert(out, "h", "x", "y")
    with pytest.raises(DuplicateName):
        optics.ps_convert(s, "q", "h", "h")


def dual_rail(bits_amps):
    """Two dual-rail qubits (c0, c1) and (t0, t1); logical 1 is the photon on rail 1."""
    layout = SystemLayout.of(("c0", "mode"), ("c1", "mode"), ("t0", "mode"), ("t1", "mode"))
    amps = {(1 - c, c, 1 - t, t): a for (c, t), a in bits_amps.items()}
    return JointState.from_amplitudes(layout, amps)


@pytest.mark.parametrize("control,target", list(itertools.product((0, 1), repeat=2)))
def test_h_cz_h_is_cnot(control, target):
    s = dual_rail({(control, target): 1})
    s = optics.dual_rail_hadamard(s, "t0", "t1")
    s = optics.dual_rail_cz(s, ("c0", "c1"), ("t0", "t1"))
    s = optics.dual_rail_hadamard(s, "t0", "t1")
    flipped = target ^ control
    expected = (1 - control, control, 1 - flipped, flipped)
    assert set(s.amplitudes) == {expected}
    assert abs(s.amplitudes[expected]) == pytest.approx(1.0)


def test_qubit_h_cz_h_is_cnot():
    layout = SystemLayout.of(("c", "qubit"), ("t", "qubit"))
    for c, t in itertools.product((0, 1), repeat=2):
        s = JointState.from_amplitudes(layout, {(c, t): 1})
        s = optics.controlled_z(optics.hadamard(s, "t"), "c", "t")
        s = optics.hadamard(s, "t")
        assert set(s.amplitudes) == {(c, t ^ c)}


def test_dual_rail_domain():
    layout = SystemLayout.of(("a", "mode"), ("b", "mode"))
    s = JointState.from_amplitudes(layout, {(1, 1): 1})
    with pytest.raises(DomainError):
        optics.dual_rail_hadamard(s, "a", "b")


def test_biased_coin_one_ninth():
    s = JointState.from_amplitudes(SystemLayout.of(("q", "qubit")), {(0,): 1})
    s = optics.biased_coin_unitary(s, "q")
    outcomes = {o.values: o.weight for o in optics.measure_qubits(s, ["q"])}
    assert outcomes[(1,)] == pytest.approx(1 / 9, abs=1e-12)
    assert outcomes[(0,)] == pytest.approx(8 / 9, abs=1e-12)


@settings(max_examples=300)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 3))
def test_measurement_weights_sum_to_one(seed, k):
    rng = np.random.default_rng(seed)
    layout = SystemLayout.of(*((f"m{i}", "mode") for i in range(3)), photon_budget=2)
    keys = layout.basis()
    v = rng.normal(size=len(keys)) + 1j * rng.normal(size=len(keys))
    v /= np.linalg.norm(v)
    s = JointState.from_amplitudes(layout, dict(zip(keys, v)))
    names = [f"m{i}" for i in range(k)]
    outcomes = optics.measure(s, names)
    assert sum(o.weight for o in outcomes) == pytest.approx(1.0, abs=1e-9)
    for o in outcomes:
        assert o.post_state.norm2() == pytest.approx(1.0, abs=1e-9)
        idx = [layout.index(n) for n in names]
        assert all(tuple(key[i] for i in idx) == o.values for key in o.post_state.amplitudes)


def test_ps_measure_keeps_single_photon_outcomes():
    s = two_modes({(1, 0): 0.6, (0, 1): 0.6, (1, 1): math.sqrt(1 - 0.72)})
    kept = optics.ps_measure_modes(s, "a", "b")
    assert [o.values for o in kept] == [(0,), (1,)]
    assert sum(o.weight for o in kept) == pytest.approx(1.0)
    raw = optics.ps_measure_modes(s, "a", "b", renormalize=False)
    assert [o.weight for o in raw] == pytest.approx([0.36, 0.36])
    with pytest.raises(PostSelectionEmpty):
        optics.ps_measure_modes(two_modes({(2, 0): 1}), "a", "b")
