"""Acceptance criteria, one test each; the terminal summary prints a PASS/FAIL line per criterion."""
import subprocess
import sys
import time
from pathlib import Path

from cqp_loqc.equivalence import check_pbb, congruence_spot_check
from cqp_loqc.lang import parse
from cqp_loqc.models import (
    basis_inputs, build, cnot_output_state, default_family, environment_for, random_input, source,
)
from cqp_loqc.semantics import explore, output_distribution

from conftest import criterion, graph_for
from oracles import (
    as_tuple_dist, close, cnot_block, cnot_truth, coincidence_distribution, output_state_formula,
    postselected_distribution, specification_distribution,
)

FAMILY = default_family()
M1 = ("out1", "out2", "cnt")


def max_diff(a: dict, b: dict) -> float:
    return max(abs(a.get(k, 0) - b.get(k, 0)) for k in set(a) | set(b))


def timed(limit: float):
    """Fail when the block takes longer than ``limit`` seconds."""
    class _T:
        def __enter__(self):
            self.t0 = time.perf_counter()
            return self

        def __exit__(self, *exc):
            self.elapsed = time.perf_counter() - self.t0
            if exc[0] is None:
                assert self.elapsed < limit, f"took {self.elapsed:.1f}s, limit {limit}s"
    return _T()


@criterion(1, "CNOT output state matches the closed form on 6 inputs")
def test_criterion_1_output_state():
    worst = 0.0
    with timed(5):
        for spec in FAMILY:
            state = cnot_output_state("Model1", spec)
            worst = max(worst, max_diff(state.amplitudes, output_state_formula(*spec.amplitudes)))
        spec = random_input()
        dense = max_diff(cnot_output_state("Model1", spec).amplitudes, cnot_block(*spec.amplitudes))
    assert worst < 1e-9 and dense < 1e-9
    return f"max error {worst:.1e}, dense oracle {dense:.1e}"


@criterion(2, "Model1 coincidence probability is 1/9 on basis inputs")
def test_criterion_2_coincidence():
    worst = 0.0
    for spec in basis_inputs():
        d = as_tuple_dist(output_distribution(graph_for("Model1", spec)), M1)
        p = sum(v for (_, _, cnt), v in d.items() if cnt == 1)
        worst = max(worst, abs(p - 1 / 9))
    assert worst < 1e-9
    return f"max |p - 1/9| = {worst:.1e}"


@criterion(3, "CNOT truth table in Model1 (given coincidence) and Model2")
def test_criterion_3_truth_table():
    for spec in basis_inputs():
        (c, t) = [k for k, v in cnot_truth(*spec.amplitudes).items() if v > 0][0]
        d1 = as_tuple_dist(output_distribution(graph_for("Model1", spec)), M1)
        hits = {(o1, o2): p for (o1, o2, cnt), p in d1.items() if cnt == 1}
        assert list(hits) == [(c, t)], spec.name()
        d2 = as_tuple_dist(output_distribution(graph_for("Model2", spec)), ("out1", "out2"))
        assert list(d2) == [(c, t)] and abs(d2[(c, t)] - 1) < 1e-12, spec.name()
    return "4/4 basis rows in both models"


def _equiv_family(a, b):
    with timed(60) as t:
        verdicts = [check_pbb(graph_for(a, s), graph_for(b, s), 1e-6) for s in FAMILY]
    assert all(v.equivalent for v in verdicts), [s.name() for s, v in zip(FAMILY, verdicts) if not v.equivalent]
    return t.elapsed


@criterion(4, "Model1 ~ Specification1 and Model2 ~ Specification2 on the default family")
def test_criterion_4_equivalence():
    t1 = _equiv_family("Model1", "Specification1")
    t2 = _equiv_family("Model2", "Specification2")
    return f"6/6 inputs each, {t1:.1f}s and {t2:.1f}s"


MUTANTS = {
    "BS2 eta 1/2": ("BS(c, i, k, j, B[1/3])", "BS(c, i, k, j, B[1/2])", {"bs2": (0.5, "reflect")}, False),
    "BS5 sign convention": ("BS(m, o, q, r, B[1/2])", "BS(m, o, q, r, R[1/2])", {"bs5": (0.5, "rotate")}, False),
    "Counter inverted": ("then 1 else 0].0", "then 0 else 1].0", {}, True),
}


@criterion(5, "three mutants are told apart with counterexamples")
def test_criterion_5_mutants():
    original = source("Model1")
    found = []
    for label, (old, new, overrides, inverted) in MUTANTS.items():
        assert original.count(old) == 1, label
        prog = parse(original.replace(old, new))
        caught = []
        for spec in FAMILY:
            env = environment_for(spec, "Model1")
            g = explore(prog, env)
            v = check_pbb(g, graph_for("Specification1", spec), 1e-6)
            oracle = coincidence_distribution(cnot_block(*spec.amplitudes, overrides), inverted)
            # the interpreter agrees with the independent oracle for the mutant circuit
            assert close(as_tuple_dist(output_distribution(g), M1), oracle, 1e-9), (label, spec.name())
            if not v.equivalent:
                assert v.counterexample, (label, spec.name())
                # and the oracle confirms the mutant is observably different there
                assert not close(oracle, specification_distribution(*spec.amplitudes), 1e-6), (label, spec.name())
                caught.append(spec.name())
        assert caught, label
        found.append(f"{label}: {len(caught)}/6")
    return ", ".join(found)


@criterion(6, "Model2 branch weights on a generic input are |amplitude|^2")
def test_criterion_6_branch_weights():
    spec = random_input()
    d = as_tuple_dist(output_distribution(graph_for("Model2", spec)), ("out1", "out2"))
    expected = cnot_truth(*spec.amplitudes)
    oracle = postselected_distribution(cnot_block(*spec.amplitudes))
    err = max_diff(d, expected)
    assert err < 1e-9 and max_diff(oracle, expected) < 1e-9
    return f"max error {err:.1e}"


PROPERTY_MODULES = ["test_state.py", "test_optics.py", "test_parser.py", "test_ownership.py"]


@criterion(7, "property suites finish within 2 minutes")
def test_criterion_7_property_suites():
    here = Path(__file__).parent
    with timed(120) as t:
        proc = subprocess.run(
            [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", *[str(here / m) for m in PROPERTY_MODULES]],
            capture_output=True, text=True, timeout=300, cwd=here.parent)
    assert proc.returncode == 0, proc.stdout[-2000:]
    return proc.stdout.strip().splitlines()[-1] + f", {t.elapsed:.1f}s wall"


CONTEXTS = [
    "[]",
    "[] | 0",
    "[] | obs![1].0",
    "obs![0].[]",
    "[] + 0",
    "(new m: ^[Int])([] | m![5].0 | m?[v: Int].obs![v + 1].0)",
    "(new out1: ^[Int])([] | out1?[v: Int].seen![v].0)",
    "[] | e![2].f![3].0",
    "(new r: ^[Int])(r![7].0 | r?[x: Int].0) | []",
    "(new z: ^[Int])([] | z![1].0) | done![0].0",
]


@criterion(8, "Model1 ~ Specification1 under 10 contexts")
def test_criterion_8_contexts():
    spec = random_input()
    with timed(300) as t:
        verdicts = congruence_spot_check(build("Model1"), build("Specification1"), CONTEXTS,
                                         environment_for(spec, "Model1"), 1e-6)
    bad = [c for c, v in zip(CONTEXTS, verdicts) if not v.equivalent]
    assert not bad, bad
    return f"10/10 contexts, {t.elapsed:.1f}s"
