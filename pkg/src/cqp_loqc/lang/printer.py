"""Pretty printer producing text that parses back to the same AST."""
from __future__ import annotations

from .ast import (
    Action, And, ApplyUnitary, BaseType, Binder, Call, ChanType, Definition, Eq, Hole,
    IfThenElse, Input, Lit, Measure, New, Nil, NsDecl, OpType, Output, Pair, Par, Plus,
    Program, PsApply, PsMeasure, QbitDecl, Sum, Unitary, Var,
)

# binding strength of expression forms; higher binds tighter
_LEVEL = {IfThenElse: 0, Measure: 0, PsMeasure: 0, ApplyUnitary: 0, PsApply: 0,
          And: 1, Eq: 2, Plus: 3}


def format_type(t) -> str:
    if isinstance(t, BaseType):
        return t.name
    if isinstance(t, ChanType):
        return "^[" + ", ".join(format_type(i) for i in t.items) + "]"
    if isinstance(t, OpType):
        return f"Op({t.arity})"
    raise TypeError(t)


def format_binder(b: Binder) -> str:
    return b.name if b.type is None else f"{b.name}: {format_type(b.type)}"


def _level(e) -> int:
    return _LEVEL.get(type(e), 4)


def _operand(e, level: int) -> str:
    text = format_expr(e)
    return f"({text})" if _level(e) < level else text


def _list(items) -> str:
    # a trailing-greedy form (measure, if) must be wrapped unless it is last
    parts = []
    for i, e in enumerate(items):
        text = format_expr(e)
        if _level(e) == 0 and i < len(items) - 1:
            text = f"({text})"
        parts.append(text)
    return ", ".join(parts)


def format_expr(e) -> str:
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Lit):
        if e.value is None:
            return "unit"
        if isinstance(e.value, bool):
            return "true" if e.value else "false"
        return str(e.value)
    if isinstance(e, Unitary):
        if e.param is not None:
            p = e.param
            return f"{e.name}[{p.numerator}/{p.denominator}]"
        return e.name
    if isinstance(e, Pair):
        return f"({_list((e.left, e.right))})"
    if isinstance(e, Plus):
        return f"{_operand(e.left, 3)} + {_operand(e.right, 4)}"
    if isinstance(e, Eq):
        return f"{_operand(e.left, 3)} = {_operand(e.right, 3)}"
    if isinstance(e, And):
        return f"{_operand(e.left, 1)} and {_operand(e.right, 2)}"
    if isinstance(e, IfThenElse):
        return f"if {format_expr(e.cond)} then {format_expr(e.then)} else {format_expr(e.orelse)}"
    if isinstance(e, (Measure, PsMeasure)):
        kw = "measure" if isinstance(e, Measure) else "psmeasure"
        return f"{kw} " + ", ".join(_operand(a, 4) for a in e.args)
    if isinstance(e, ApplyUnitary):
        return f"{_list(e.targets)} *= {format_expr(e.unitary)}"
    if isinstance(e, PsApply):
        return f"{format_binder(e.first)}, {format_binder(e.second)} *= PS({format_expr(e.qubit)})"
    raise TypeError(e)


def format_process(p) -> str:
    if isinstance(p, Nil):
        return "0"
    if isinstance(p, Hole):
        return "[]"
    if isinstance(p, Par):
        return f"({format_process(p.left)} | {format_process(p.right)})"
    if isinstance(p, Sum):
        return f"({format_process(p.left)} + {format_process(p.right)})"
    if isinstance(p, Input):
        binders = ", ".join(format_binder(b) for b in p.binders)
        return f"{format_expr(p.chan)}?[{binders}].{format_process(p.cont)}"
    if isinstance(p, Output):
        return f"{format_expr(p.chan)}![{_list(p.payload)}].{format_process(p.cont)}"
    if isinstance(p, Action):
        return f"{{{format_expr(p.expr)}}}.{format_process(p.cont)}"
    if isinstance(p, QbitDecl):
        return f"(qbit {p.name}){format_process(p.cont)}"
    if isinstance(p, NsDecl):
        return f"(ns {p.name}){format_process(p.cont)}"
    if isinstance(p, New):
        head = p.name if p.type is None else f"{p.name}: {format_type(p.type)}"
        return f"(new {head}){format_process(p.cont)}"
    if isinstance(p, Call):
        return f"{p.name}({_list(p.args)})"
    raise TypeError(p)


def format_definition(d: Definition) -> str:
    params = ", ".join(format_binder(b) for b in d.params)
    return f"{d.name}({params}) = {format_process(d.body)}"


def pretty_print(node) -> str:
    """Render a program, process or expression as concrete syntax."""
    if isinstance(node, Program):
        lines = [format_definition(d) for d in node.definitions]
        lines.append(f"Main = {format_process(node.entry)}")
        return "\n\n".join(lines) + "\n"
    if isinstance(node, Definition):
        return format_definition(node)
    if type(node) in _LEVEL or isinstance(node, (Var, Lit, Unitary, Pair)):
        return format_expr(node)
    return format_process(node)
