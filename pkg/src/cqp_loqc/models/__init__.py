"""The LOQC CNOT process corpus, its builders and input-state schedules.

Every model ships as a ``.cqp`` file in this package. :func:`build` constructs
the same programs directly from AST nodes, so a change to either side shows
up as a failing comparison.
"""
from __future__ import annotations

import ast as pyast
import cmath
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib import resources
from typing import Sequence

import numpy as np

from ..errors import ContextError, NotNormalized
from ..lang.ast import (
    BIT, INT, NS, QBIT, ApplyUnitary, And, Binder, Call, ChanType, Definition, Eq, IfThenElse,
    Input, Lit, Measure, New, Nil, NsDecl, OpType, Output, Pair, Plus, Program, PsApply,
    PsMeasure, QbitDecl, Unitary, Var, Action, par,
)
from ..lang.expand import base_name
from ..lang.parser import parse
from ..semantics import EnvironmentSchedule, Injection, run_until_measurement
from ..state import MODE, JointState, Slot, SystemLayout


class ModelId(str, Enum):
    PolSe = "PolSe"
    BS = "BS"
    Det = "Det"
    PDet = "PDet"
    Counter = "Counter"
    PolSeCT = "PolSeCT"
    CNOT = "CNOT"
    MMT = "MMT"
    PSM = "PSM"
    OP = "OP"
    OPCNOT = "OPCNOT"
    Output = "Output"
    Model1 = "Model1"
    Specification1 = "Specification1"
    Model2 = "Model2"
    Specification2 = "Specification2"


def model_id(name: str | ModelId) -> ModelId:
    try:
        return ModelId(name)
    except ValueError:
        known = ", ".join(m.value for m in ModelId)
        raise ValueError(f"unknown model {name!r}; expected one of {known}") from None


def source(model: str | ModelId) -> str:
    m = model_id(model)
    return resources.files(__name__).joinpath(f"{m.value}.cqp").read_text()


def load_source(model: str | ModelId) -> Program:
    return parse(source(model))


# AST shorthands

NS_CH = ChanType((NS,))
QBIT_CH = ChanType((QBIT,))
INT_CH = ChanType((INT,))
BIT_CH = ChanType((BIT,))
PAIR_CH = ChanType((INT, INT))


def _v(*names: str):
    return tuple(Var(n) for n in names)


def _b(spec: str, t) -> tuple[Binder, ...]:
    return tuple(Binder(n, t) for n in spec.split())


def _recv(chan: str, binders: Sequence[Binder], cont):
    return Input(Var(chan), tuple(binders), cont)


def _send(chan: str, payload, cont=None):
    if not isinstance(payload, tuple):
        payload = (payload,)
    return Output(Var(chan), payload, Nil() if cont is None else cont)


def _recv_modes(chans: str, slots: str, cont):
    for c, s in reversed(list(zip(chans.split(), slots.split()))):
        cont = _recv(c, (Binder(s, NS),), cont)
    return cont


def _send_modes(chans: str, slots: str, cont=None):
    out = Nil() if cont is None else cont
    for c, s in reversed(list(zip(chans.split(), slots.split()))):
        out = _send(c, Var(s), out)
    return out


def _new(binders: Sequence[Binder], body):
    for b in reversed(binders):
        body = New(b.name, b.type, body)
    return body


def _call(name: str, *args):
    return Call(name, tuple(Var(a) if isinstance(a, str) else a for a in args))


def _bs(eta: Fraction):
    return Unitary("B", Fraction(eta))


# definitions

def _polse() -> Definition:
    body = _recv("a", (Binder("q0", QBIT),),
                 Action(PsApply(Binder("s0", NS), Binder("s1", NS), Var("q0")),
                        _send_modes("c d", "s0 s1")))
    return Definition("PolSe", (Binder("a", QBIT_CH),) + _b("c d", NS_CH), body)


def _polsect() -> Definition:
    return Definition("PolSeCT", _b("a b", QBIT_CH) + _b("c d e f", NS_CH),
                      par(_call("PolSe", "a", "c", "d"), _call("PolSe", "b", "e", "f")))


def _bs_def() -> Definition:
    body = _recv_modes("e f", "s2 s3",
                       Action(ApplyUnitary(_v("s2", "s3"), Var("u")), _send_modes("h i", "s2 s3")))
    return Definition("BS", _b("e f h i", NS_CH) + (Binder("u", OpType(2)),), body)


def _cnot() -> Definition:
    third, half = Fraction(1, 3), Fraction(1, 2)
    body = par(
        _call("BS", "e", "f", "g", "h", _bs(half)),
        _send("i", Var("y")),
        _call("BS", "c", "i", "k", "j", _bs(third)),
        _recv("j", (Binder("y", NS),), Nil()),
        _call("BS", "g", "d", "m", "l", _bs(third)),
        _send("n", Var("z")),
        _call("BS", "h", "n", "o", "p", _bs(third)),
        _recv("p", (Binder("z", NS),), Nil()),
        _call("BS", "m", "o", "q", "r", _bs(half)),
    )
    body = _new(_b("g h m o i j n p", NS_CH), NsDecl("y", NsDecl("z", body)))
    return Definition("CNOT", _b("c d e f k l q r", NS_CH), body)


def _det() -> Definition:
    body = _recv_modes("l m", "s0 s1", _send("u", Measure(_v("s0", "s1"))))
    return Definition("Det", _b("l m", NS_CH) + (Binder("u", PAIR_CH),), body)


def _pdet() -> Definition:
    body = _recv_modes("l m", "s0 s1", _send("u", PsMeasure(_v("s0", "s1"))))
    return Definition("PDet", _b("l m", NS_CH) + (Binder("u", BIT_CH),), body)


def _counter() -> Definition:
    one = Lit(1)
    ok = And(Eq(Plus(Var("c0"), Var("c1")), one), Eq(Plus(Var("t0"), Var("t1")), one))
    outputs = _send("out1", IfThenElse(ok, Var("c1"), Lit(0)),
                    _send("out2", IfThenElse(ok, Var("t1"), Lit(0)),
                          _send("cnt", IfThenElse(ok, Lit(1), Lit(0)))))
    body = _recv("u", _b("c0 c1", INT), _recv("v", _b("t0 t1", INT), outputs))
    params = _b("u v", PAIR_CH) + (Binder("out1", INT_CH), Binder("cnt", BIT_CH), Binder("out2", INT_CH))
    return Definition("Counter", params, body)


def _mmt() -> Definition:
    body = _new(_b("u v", PAIR_CH), par(
        _call("Det", "k", "l", "u"),
        _call("Det", "q", "r", "v"),
        _call("Counter", "u", "v", "out1", "cnt", "out2"),
    ))
    params = _b("k l q r", NS_CH) + (Binder("out1", INT_CH), Binder("cnt", BIT_CH), Binder("out2", INT_CH))
    return Definition("MMT", params, body)


def _collect() -> Definition:
    body = _recv("u", (Binder("c", BIT),), _recv("v", (Binder("t", BIT),),
                                                 _send("out1", Var("c"), _send("out2", Var("t")))))
    return Definition("Collect", _b("u v out1 out2", BIT_CH), body)


def _psm() -> Definition:
    body = _new(_b("u v", BIT_CH), par(
        _call("PDet", "k", "l", "u"),
        _call("PDet", "q", "r", "v"),
        _call("Collect", "u", "v", "out1", "out2"),
    ))
    return Definition("PSM", _b("k l q r", NS_CH) + _b("out1 out2", BIT_CH), body)


def _gates(cont, coin: bool):
    h = ApplyUnitary(_v("s2", "s3"), Unitary("H"))
    cz = ApplyUnitary((Pair(Var("s0"), Var("s1")), Pair(Var("s2"), Var("s3"))), Unitary("CZ"))
    cont = Action(h, cont)
    cont = Action(cz, cont)
    if coin:
        cont = Action(ApplyUnitary(_v("q2"), Unitary("U19")), cont)
    return Action(h, cont)


def _op() -> Definition:
    tail = _send_modes("h i j k", "s0 s1 s2 s3", _send("g", Measure(_v("q2"))))
    body = QbitDecl("q2", _recv_modes("c d e f", "s0 s1 s2 s3", _gates(tail, coin=True)))
    params = _b("c d e f", NS_CH) + (Binder("g", BIT_CH),) + _b("h i j k", NS_CH)
    return Definition("OP", params, body)


def _opcnot() -> Definition:
    body = _recv_modes("c d e f", "s0 s1 s2 s3", _gates(_send_modes("h i j k", "s0 s1 s2 s3"), coin=False))
    return Definition("OPCNOT", _b("c d e f h i j k", NS_CH), body)


def _output() -> Definition:
    x_set = Eq(Var("x"), Lit(1))
    emit = _send("out1", IfThenElse(x_set, Measure(_v("s1")), Lit(0)),
                 _send("out2", IfThenElse(x_set, Measure(_v("s3")), Lit(0)),
                       _send("cnt", Var("x"))))
    body = _recv_modes("h i j k", "s0 s1 s2 s3", _recv("g", (Binder("x", BIT),), emit))
    params = ((Binder("g", BIT_CH),) + _b("h i j k", NS_CH)
              + (Binder("out1", INT_CH), Binder("cnt", BIT_CH), Binder("out2", INT_CH)))
    return Definition("Output", params, body)


def _output2() -> Definition:
    emit = _send("out1", Measure(_v("s1")), _send("out2", Measure(_v("s3"))))
    body = _recv_modes("h i j k", "s0 s1 s2 s3", emit)
    return Definition("Output2", _b("h i j k", NS_CH) + _b("out1 out2", INT_CH), body)


def _model1() -> Definition:
    body = _new(_b("c d e f k l q r", NS_CH), par(
        _call("PolSeCT", "a", "b", "c", "d", "e", "f"),
        _call("CNOT", "c", "d", "e", "f", "k", "l", "q", "r"),
        _call("MMT", "k", "l", "q", "r", "out1", "cnt", "out2"),
    ))
    params = _b("a b", QBIT_CH) + (Binder("out1", INT_CH), Binder("cnt", BIT_CH), Binder("out2", INT_CH))
    return Definition("Model1", params, body)


def _model2() -> Definition:
    body = _new(_b("c d e f k l q r", NS_CH), par(
        _call("PolSeCT", "a", "b", "c", "d", "e", "f"),
        _call("CNOT", "c", "d", "e", "f", "k", "l", "q", "r"),
        _call("PSM", "k", "l", "q", "r", "out1", "out2"),
    ))
    return Definition("Model2", _b("a b", QBIT_CH) + _b("out1 out2", BIT_CH), body)


def _spec1() -> Definition:
    chans = _b("c d e f", NS_CH) + (Binder("g", BIT_CH),) + _b("h i j k", NS_CH)
    body = _new(chans, par(
        _call("PolSeCT", "a", "b", "c", "d", "e", "f"),
        _call("OP", "c", "d", "e", "f", "g", "h", "i", "j", "k"),
        _call("Output", "g", "h", "i", "j", "k", "out1", "cnt", "out2"),
    ))
    params = _b("a b", QBIT_CH) + (Binder("out1", INT_CH), Binder("cnt", BIT_CH), Binder("out2", INT_CH))
    return Definition("Specification1", params, body)


def _spec2() -> Definition:
    body = _new(_b("c d e f h i j k", NS_CH), par(
        _call("PolSeCT", "a", "b", "c", "d", "e", "f"),
        _call("OPCNOT", "c", "d", "e", "f", "h", "i", "j", "k"),
        _call("Output2", "h", "i", "j", "k", "out1", "out2"),
    ))
    return Definition("Specification2", _b("a b", QBIT_CH) + _b("out1 out2", INT_CH), body)


_DEFS = {
    "PolSe": _polse, "PolSeCT": _polsect, "BS": _bs_def, "CNOT": _cnot, "Det": _det,
    "PDet": _pdet, "Counter": _counter, "MMT": _mmt, "Collect": _collect, "PSM": _psm,
    "OP": _op, "OPCNOT": _opcnot, "Output": _output, "Output2": _output2,
    "Model1": _model1, "Model2": _model2, "Specification1": _spec1, "Specification2": _spec2,
}

# definitions each model needs, in file order
_NEEDS = {
    ModelId.PolSe: ("PolSe",),
    ModelId.BS: ("BS",),
    ModelId.Det: ("Det",),
    ModelId.PDet: ("PDet",),
    ModelId.Counter: ("Counter",),
    ModelId.PolSeCT: ("PolSe", "PolSeCT"),
    ModelId.CNOT: ("BS", "CNOT"),
    ModelId.MMT: ("Det", "Counter", "MMT"),
    ModelId.PSM: ("PDet", "Collect", "PSM"),
    ModelId.OP: ("OP",),
    ModelId.OPCNOT: ("OPCNOT",),
    ModelId.Output: ("Output",),
    ModelId.Model1: ("PolSe", "PolSeCT", "BS", "CNOT", "Det", "Counter", "MMT", "Model1"),
    ModelId.Model2: ("PolSe", "PolSeCT", "BS", "CNOT", "PDet", "Collect", "PSM", "Model2"),
    ModelId.Specification1: ("PolSe", "PolSeCT", "OP", "Output", "Specification1"),
    ModelId.Specification2: ("PolSe", "PolSeCT", "OPCNOT", "Output2", "Specification2"),
}


def build(model: str | ModelId) -> Program:
    """The program for ``model``, entry point applied to its own parameter names."""
    m = model_id(model)
    defs = tuple(_DEFS[n]() for n in _NEEDS[m])
    top = defs[-1]
    args = []
    for b in top.params:
        # the bare beam splitter is instantiated as a 50:50 splitter
        args.append(_bs(Fraction(1, 2)) if isinstance(b.type, OpType) else Var(b.name))
    return Program(defs, Call(top.name, tuple(args)))


# inputs

_BELL = 1 / math.sqrt(2)


@dataclass(frozen=True)
class InputStateSpec:
    """alpha|00> + beta|01> + gamma|10> + delta|11> on (control, target)."""

    alpha: complex
    beta: complex
    gamma: complex
    delta: complex
    label: str = ""

    def __post_init__(self):
        for f in ("alpha", "beta", "gamma", "delta"):
            object.__setattr__(self, f, complex(getattr(self, f)))
        norm = sum(abs(a) ** 2 for a in self.amplitudes)
        if abs(norm - 1.0) > 1e-9:
            raise NotNormalized(f"input amplitudes have squared norm {norm:.12g}")

    @property
    def amplitudes(self) -> tuple[complex, complex, complex, complex]:
        return (self.alpha, self.beta, self.gamma, self.delta)

    def by_basis(self) -> dict[tuple[int, int], complex]:
        keys = ((0, 0), (0, 1), (1, 0), (1, 1))
        return {k: a for k, a in zip(keys, self.amplitudes) if abs(a) > 0}

    def name(self) -> str:
        if self.label:
            return self.label
        return ",".join(_format_amp(a) for a in self.amplitudes)

    def to_dict(self) -> dict:
        return {"label": self.name(),
                "amplitudes": [[a.real, a.imag] for a in self.amplitudes]}

    @classmethod
    def basis(cls, control: int, target: int) -> "InputStateSpec":
        amps = [0, 0, 0, 0]
        amps[2 * control + target] = 1
        return cls(*amps, label=f"|{control}{target}>")

    @classmethod
    def parse(cls, text: str) -> "InputStateSpec":
        """Read ``00``/``01``/``10``/``11``/``bell`` or four comma-separated amplitudes.

        Each amplitude is ``re`` or ``re:im``, where a part may use numbers,
        ``+ - * /``, ``j`` and ``sqrt(...)``, e.g. ``1/sqrt(2)``.
        """
        t = text.strip()
        if t in ("00", "01", "10", "11"):
            return cls.basis(int(t[0]), int(t[1]))
        if t.lower() == "bell":
            return cls(_BELL, 0, 0, _BELL, label="bell")
        parts = [p for p in t.split(",")]
        if len(parts) != 4:
            raise ValueError(f"expected four amplitudes, got {len(parts)}")
        amps = []
        for p in parts:
            re_im = p.split(":")
            if len(re_im) > 2:
                raise ValueError(f"bad amplitude {p!r}")
            value = _number(re_im[0])
            if len(re_im) == 2:
                value += 1j * _number(re_im[1])
            amps.append(value)
        return cls(*amps)


def _format_amp(a: complex) -> str:
    def r(x):
        return f"{x:.6g}"
    return r(a.real) if abs(a.imag) < 1e-15 else f"{r(a.real)}:{r(a.imag)}"


_OPS = {pyast.Add: lambda a, b: a + b, pyast.Sub: lambda a, b: a - b,
        pyast.Mult: lambda a, b: a * b, pyast.Div: lambda a, b: a / b}


def _number(text: str) -> complex:
    def ev(node):
        if isinstance(node, pyast.Expression):
            return ev(node.body)
        if isinstance(node, pyast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, pyast.UnaryOp) and isinstance(node.op, (pyast.USub, pyast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, pyast.USub) else v
        if isinstance(node, pyast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if (isinstance(node, pyast.Call) and isinstance(node.func, pyast.Name)
                and node.func.id == "sqrt" and len(node.args) == 1):
            return cmath.sqrt(ev(node.args[0]))
        raise ValueError(f"unsupported amplitude syntax {text!r}")
    try:
        tree = pyast.parse(text.strip(), mode="eval")
    except SyntaxError:
        raise ValueError(f"bad amplitude {text!r}") from None
    return complex(ev(tree))


def basis_inputs() -> list[InputStateSpec]:
    return [InputStateSpec.basis(c, t) for c in (0, 1) for t in (0, 1)]


def random_input(seed: int = 7) -> InputStateSpec:
    rng = np.random.default_rng(seed)
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    v = v / np.linalg.norm(v)
    return InputStateSpec(*(complex(x) for x in v), label=f"random(seed={seed})")


def default_family() -> list[InputStateSpec]:
    """Four basis states, the maximally entangled input and one random input."""
    return basis_inputs() + [InputStateSpec(_BELL, 0, 0, _BELL, label="bell"), random_input()]


# environments

# visible output channels per top-level model, in the order they are read
OUTPUTS = {
    ModelId.Model1: ("out1", "out2", "cnt"),
    ModelId.Specification1: ("out1", "out2", "cnt"),
    ModelId.Model2: ("out1", "out2"),
    ModelId.Specification2: ("out1", "out2"),
}


def environment_for(spec: InputStateSpec, model: str | ModelId = ModelId.Model1) -> EnvironmentSchedule:
    """Environment holding q1, q2 in the input state and sending them on a, b."""
    m = model_id(model)
    if m not in OUTPUTS:
        raise ContextError(f"{m.value} does not take the two input qubits")
    layout = SystemLayout.of(("q1", "qubit"), ("q2", "qubit"))
    state = JointState.from_amplitudes(layout, spec.by_basis())
    inputs = {"a": [Injection(names=("q1",))], "b": [Injection(names=("q2",))]}
    return EnvironmentSchedule.create(state, inputs, OUTPUTS[m])


# the state leaving the CNOT block

CNOT_PORTS = ("k", "l", "q", "r", "j", "p")


def cnot_output_state(model: str | ModelId, spec: InputStateSpec) -> JointState:
    """Pure state after all five beam splitters, before any detection.

    Slots are renamed to the CNOT ports: k, l carry the control rails, q, r the
    target rails, j, p the absorbed ancilla outputs.
    """
    m = model_id(model)
    if m not in (ModelId.Model1, ModelId.Model2):
        raise ContextError(f"{m.value} has no beam-splitter CNOT block")
    config, log = run_until_measurement(build(m), environment_for(spec, m))
    if len(config.components) != 1:
        raise ContextError("the CNOT block did not finish in a pure state")
    last: dict[str, str] = {}
    for ev in log:
        if len(ev.names) == 1:
            last[base_name(ev.chan)] = ev.names[0]
    missing = [p for p in CNOT_PORTS if p not in last]
    if missing:
        raise ContextError(f"no mode observed on ports {missing}")
    state = config.components[0].state
    runtime = [last[p] for p in CNOT_PORTS]
    if set(runtime) != set(state.names):
        raise ContextError(f"unexpected subsystems {sorted(set(state.names) - set(runtime))}")
    state = state.reordered(runtime)
    layout = SystemLayout(tuple(Slot(p, MODE) for p in CNOT_PORTS), state.photon_budget)
    return JointState(layout, dict(state.amplitudes))


__all__ = [
    "ModelId", "model_id", "source", "load_source", "build", "InputStateSpec", "basis_inputs",
    "random_input", "default_family", "OUTPUTS", "environment_for", "CNOT_PORTS",
    "cnot_output_state",
]
