import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqp_loqc.errors import OwnershipFault, UnknownName
from cqp_loqc.lang import base_name, check_ownership, expand, free_names, parse, parse_process
from cqp_loqc.lang.ast import Call, Input, New, Output, Par, QbitDecl, Var
from cqp_loqc.lang.expand import ExpansionError
from cqp_loqc.models import ModelId, build
from cqp_loqc.semantics import EnvironmentSchedule, explore
from cqp_loqc.state import JointState


def messages(text):
    return [str(d) for d in check_ownership(parse(text))]


def test_expand_inlines_and_renames_uniquely():
    prog = parse("P(c: ^[Int]) = (new d)c?[x: Int].d![x].0\nMain = (P(a) | P(a))")
    term = expand(prog)
    assert isinstance(term, Par)
    left, right = term.left, term.right
    assert isinstance(left, New) and isinstance(right, New)
    assert left.name != right.name
    assert base_name(left.name) == base_name(right.name) == "d"
    assert left.cont.chan == Var("a")
    assert left.cont.binders[0].name != right.cont.binders[0].name


def test_expand_errors():
    with pytest.raises(ExpansionError, match="undefined"):
        expand(parse("Main = Q(a)"))
    with pytest.raises(ExpansionError, match="expects 1"):
        expand(parse("P(c) = 0\nMain = P(a, b)"))
    with pytest.raises(ExpansionError, match="deeper"):
        expand(parse("P(c) = c![1].P(c)\nMain = P(a)"))
    assert [d.kind for d in check_ownership(parse("Main = Q(a)"))] == ["expansion"]


def test_free_names():
    p = parse_process("(new c)(c?[x: Int].d![x, y].0 | (qbit q){q *= H}.e![q].0)")
    assert free_names(p) == {"d", "y", "e"}


@pytest.mark.parametrize("model", list(ModelId))
def test_corpus_is_ownership_clean(model):
    assert check_ownership(build(model)) == []


def test_use_after_send():
    assert messages("Main = (qbit q)c![q].d![q].0") == ["use after send: q"]


def test_send_then_measure():
    assert messages("Main = (qbit q)c![q].d![measure q].0") == ["use after send: q"]


def test_shared_ownership():
    assert messages("Main = (qbit q)({q *= H}.0 | {q *= H}.0)") == ["shared ownership: q"]


def test_use_after_conversion():
    text = "Main = (qbit q){s: NS, t: NS *= PS(q)}.{q *= H}.0"
    assert messages(text) == ["use after conversion: q"]


def test_unbound_quantum_variable():
    assert messages("Main = {q *= H}.0") == ["unbound quantum variable: q"]
    assert messages("Main = c![x + 1].0") == ["unbound variable: x"]


def test_arity_mismatch():
    text = "Main = (new c: ^[Int, Int])(c![1].0 | c?[x: Int, y: Int].0)"
    assert messages(text) == ["arity mismatch on c: expected 2, got 1"]


def test_choice_branches_may_share():
    assert messages("Main = (qbit q)({q *= H}.c![q].0 + d![q].0)") == []


def test_message_matches_example():
    assert messages("Main = (qbit q)c![q].d![q].0 | 0") == ["use after send: q"]
    prog = parse("Main = c![q].d![q].0")
    assert [str(d) for d in check_ownership(prog)] == ["use after send: q", "unbound quantum variable: q"]


# generated programs: whatever the checker accepts must never fault at run time

STEPS = [
    "{{{v} *= H}}",
    "{{x, y *= CZ}}",
    "c![{v}]",
    "d![measure {v}]",
    "{{{v} *= U19}}",
]


@st.composite
def small_programs(draw):
    branches = []
    for _ in range(draw(st.integers(1, 3))):
        steps = [draw(st.sampled_from(STEPS)).format(v=draw(st.sampled_from("xy")))
                 for _ in range(draw(st.integers(1, 3)))]
        branches.append(".".join(steps) + ".0")
    return "Main = (qbit x, y)(" + " | ".join(branches) + ")"


@settings(max_examples=300)
@given(small_programs())
def test_ownership_check_is_sound(text):
    prog = parse(text)
    diags = check_ownership(prog)
    env = EnvironmentSchedule.create(JointState.vacuum(), {}, ("c", "d"))
    try:
        explore(prog, env)
    except (OwnershipFault, UnknownName):
        assert diags, f"checker accepted a program that faulted: {text}"


def test_fault_at_run_time_is_reported():
    prog = parse("Main = (qbit q)c![q].{q *= H}.0")
    env = EnvironmentSchedule.create(JointState.vacuum(), {}, ("c",))
    with pytest.raises((OwnershipFault, UnknownName)):
        explore(prog, env)
    assert check_ownership(prog)
