import random

import pytest

from cqp_loqc.errors import LimitExceeded, PostSelectionEmpty, StuckExpression
from cqp_loqc.lang import parse
from cqp_loqc.models import build, default_family, environment_for
from cqp_loqc.semantics import (
    EnvironmentSchedule, Injection, InputLabel, Limits, OutputLabel, ProbStep, Tau, explore,
    graph_to_dict, output_distribution, run, run_until_measurement,
)
from cqp_loqc.state import JointState, SystemLayout

from conftest import graph_for
from oracles import as_tuple_dist

FAMILY = default_family()


def reads(*chans, state=None, inputs=None):
    return EnvironmentSchedule.create(state or JointState.vacuum(), inputs or {}, chans)


def dist_of(text, env):
    return output_distribution(explore(parse(text), env))


def test_measurement_of_plus_state():
    d = dist_of("Main = (qbit q){q *= H}.c![measure q].0", reads("c"))
    assert d == {(("c", (0,)),): pytest.approx(0.5), (("c", (1,)),): pytest.approx(0.5)}


def test_communication_passes_values():
    d = dist_of("Main = (new m: ^[Int])(m![1 + 2].0 | m?[x: Int].c![x].0)", reads("c"))
    assert d == {(("c", (3,)),): 1.0}


def test_conditional_and_equality():
    text = "Main = (new m: ^[Int])(m![2].0 | m?[x: Int].c![if x = 2 and true then 7 else 0].0)"
    assert dist_of(text, reads("c")) == {(("c", (7,)),): 1.0}


def test_environment_injects_qubit():
    layout = SystemLayout.of(("q1", "qubit"))
    state = JointState.from_amplitudes(layout, {(1,): 1})
    env = reads("c", state=state, inputs={"a": [Injection(names=("q1",))]})
    g = explore(parse("Main = a?[q: Qbit].c![measure q].0"), env)
    assert output_distribution(g) == {(("c", (1,)),): 1.0}
    assert any(isinstance(e.label, InputLabel) for e in g.edges)


def test_entangled_input_outcomes_are_correlated():
    layout = SystemLayout.of(("q1", "qubit"), ("q2", "qubit"))
    state = JointState.from_amplitudes(layout, {(0, 0): 2 ** -0.5, (1, 1): 2 ** -0.5})
    env = reads("c", state=state, inputs={"a": [Injection(names=("q1",))]})
    g = explore(parse("Main = a?[q: Qbit].c![measure q].0"), env)
    assert output_distribution(g) == {(("c", (0,)),): pytest.approx(0.5), (("c", (1,)),): pytest.approx(0.5)}
    # after the output the environment's remaining qubit is collapsed accordingly
    for e in g.edges:
        if isinstance(e.label, ProbStep):
            rho = g.nodes[e.dst].config.env_density()
            bit = e.label.values[0]
            assert rho.layout.names == ("q2",)
            assert rho.entry((bit,), (bit,)) == pytest.approx(1.0)


def test_photon_conversion_and_beam_splitter():
    layout = SystemLayout.of(("q1", "qubit"))
    state = JointState.from_amplitudes(layout, {(0,): 1})
    env = reads("c", state=state, inputs={"a": [Injection(names=("q1",))]})
    text = "Main = a?[q: Qbit].{s: NS, t: NS *= PS(q)}.{s, t *= B[1/3]}.c![measure s, t].0"
    d = dist_of(text, env)
    assert d == {(("c", (1, 0)),): pytest.approx(1 / 3), (("c", (0, 1)),): pytest.approx(2 / 3)}


def test_psmeasure_renormalizes_globally():
    layout = SystemLayout.of(("q1", "qubit"))
    state = JointState.from_amplitudes(layout, {(0,): 1})
    env = reads("c", state=state, inputs={"a": [Injection(names=("q1",))]})
    # half the amplitude leaves the pair (s, t) into u; post-selection keeps the rest
    text = ("Main = a?[q: Qbit].{s: NS, t: NS *= PS(q)}.(ns u){s, u *= B[1/2]}."
            "c![psmeasure s, t].0")
    assert dist_of(text, env) == {(("c", (0,)),): pytest.approx(1.0)}


def test_deadlock_is_detected():
    g = explore(parse("Main = (new m: ^[Int])m?[x: Int].0"), reads())
    assert [n.deadlock for n in g.nodes.values()] == [True]
    report = run(parse("Main = (new m: ^[Int])m?[x: Int].0"), reads())
    assert len(report.deadlocks) == 1


def test_runtime_errors():
    with pytest.raises(PostSelectionEmpty):
        explore(parse("Main = (ns s, t)c![psmeasure s, t].0"), reads("c"))
    with pytest.raises(StuckExpression):
        explore(parse("Main = (qbit q){q *= CZ}.0"), reads())


def test_limits():
    spec = FAMILY[0]
    with pytest.raises(LimitExceeded):
        explore(build("Model1"), environment_for(spec, "Model1"), Limits(max_nodes=20))
    with pytest.raises(LimitExceeded):
        explore(build("Model1"), environment_for(spec, "Model1"), Limits(max_photons=1))


def test_graph_serialization_is_ordered():
    g = graph_for("Specification2", FAMILY[0])
    d = graph_to_dict(g)
    assert [n["id"] for n in d["nodes"]] == sorted(n["id"] for n in d["nodes"])
    assert d["stats"]["nodes"] == len(g.nodes)
    assert d["initial"] == g.initial


def test_run_until_measurement_logs_internal_traffic():
    config, log = run_until_measurement(build("Model1"), environment_for(FAMILY[0], "Model1"))
    assert config.is_pure
    chans = {ev.chan.split("@")[0] for ev in log}
    assert {"c", "d", "e", "f", "k", "l", "q", "r", "j", "p"} <= chans


# invariants over the full models

MODELS = ["Model1", "Model2", "Specification1", "Specification2"]


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("spec", [FAMILY[2], FAMILY[4], FAMILY[5]], ids=lambda s: s.name())
def test_tau_edges_leave_environment_untouched(model, spec):
    g = graph_for(model, spec)
    checked = 0
    for e in g.edges:
        if isinstance(e.label, Tau):
            before = g.nodes[e.src].config.env_density()
            after = g.nodes[e.dst].config.env_density()
            assert before.allclose(after, 1e-9), (e.src, e.dst, e.rule)
            checked += 1
    assert checked > 0


@pytest.mark.parametrize("model", MODELS)
def test_probabilistic_nodes_are_distributions(model):
    g = graph_for(model, FAMILY[5])
    for nid, node in g.nodes.items():
        if node.kind == "prob":
            edges = g.successors(nid)
            assert edges and all(isinstance(e.label, ProbStep) for e in edges)
            assert sum(e.label.p for e in edges) == pytest.approx(1.0, abs=1e-9)
            values = [e.label.values for e in edges]
            assert len(set(values)) == len(values)
        else:
            assert all(not isinstance(e.label, ProbStep) for e in g.successors(nid))


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("spec", [FAMILY[1], FAMILY[5]], ids=lambda s: s.name())
def test_schedulers_agree(model, spec):
    """Confluence: the output distribution does not depend on interleaving."""
    g = graph_for(model, spec)
    first = output_distribution(g)
    last = output_distribution(g, lambda nid, edges: edges[-1])
    rng = random.Random(1)
    picks = {}

    def rand(nid, edges):
        if nid not in picks:
            picks[nid] = rng.randrange(len(edges))
        return edges[picks[nid]]

    for other in (last, output_distribution(g, rand)):
        assert set(other) == set(first)
        for k in first:
            assert other[k] == pytest.approx(first[k], abs=1e-9)


@pytest.mark.parametrize("model", MODELS)
def test_every_run_terminates_cleanly(model):
    g = graph_for(model, FAMILY[4])
    assert not any(n.deadlock for n in g.nodes.values())
    assert sum(output_distribution(g).values()) == pytest.approx(1.0, abs=1e-9)


def test_output_labels_hide_emitted_names():
    assert OutputLabel("c", ((0,),), ("x@1",)).key() == OutputLabel("c", ((0,),), ("y@7",)).key()


def test_model1_distribution_matches_channels():
    d = as_tuple_dist(output_distribution(graph_for("Model1", FAMILY[2])), ("out1", "out2", "cnt"))
    assert d == {(0, 0, 0): pytest.approx(8 / 9), (1, 1, 1): pytest.approx(1 / 9)}
