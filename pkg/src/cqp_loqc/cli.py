"""Command-line front end.

Exit codes: 0 success (or equivalent), 1 not equivalent, 2 usage error,
3 syntax or ownership error, 4 exploration limit exceeded.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .equivalence import check_pbb
from .errors import CQPError, CQPSyntaxError, LimitExceeded, NotNormalized
from .lang import Call, Program, check_ownership, parse
from .models import (
    CNOT_PORTS, OUTPUTS, InputStateSpec, ModelId, basis_inputs, build, cnot_output_state,
    default_family, environment_for,
)
from .semantics import Limits, explore, graph_to_dict, run

EXIT_OK, EXIT_DIFFERENT, EXIT_USAGE, EXIT_SYNTAX, EXIT_LIMIT = 0, 1, 2, 3, 4
DEFAULT_TOL = 1e-6


class UsageError(Exception):
    pass


def default_tolerance() -> float:
    raw = os.environ.get("CQP_LOQC_TOL")
    if not raw:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"CQP_LOQC_TOL is not a number: {raw!r}") from None


# model resolution

def resolve(arg: str) -> tuple[str, Program, ModelId]:
    """Model name or .cqp path; returns (display name, program, top-level kind)."""
    if arg in ModelId.__members__:
        m = ModelId(arg)
        return m.value, build(m), m
    path = Path(arg)
    if not path.exists():
        known = ", ".join(ModelId.__members__)
        raise UsageError(f"{arg!r} is neither a model ({known}) nor a file")
    program = parse(path.read_text())
    entry = program.entry
    if isinstance(entry, Call) and entry.name in ModelId.__members__:
        return path.stem, program, ModelId(entry.name)
    raise UsageError(f"{arg}: entry point must call Model1, Model2, Specification1 or Specification2")


def _top_level(name: str, program: Program, kind: ModelId) -> None:
    if kind not in OUTPUTS:
        raise UsageError(f"{name} is a building block; pick one of {', '.join(m.value for m in OUTPUTS)}")
    diags = check_ownership(program)
    if diags:
        raise _OwnershipFailure(diags)


class _OwnershipFailure(Exception):
    def __init__(self, diagnostics):
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def _input(text: str) -> InputStateSpec:
    try:
        return InputStateSpec.parse(text)
    except (ValueError, NotNormalized) as exc:
        raise UsageError(f"--input {text!r}: {exc}") from None


def _inputs(choice: str) -> list[InputStateSpec]:
    if choice == "basis":
        return basis_inputs()
    if choice == "family":
        return default_family()
    path = Path(choice)
    if not path.exists():
        raise UsageError(f"--inputs expects basis, family or a file, got {choice!r}")
    specs = []
    for line in path.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            specs.append(_input(line))
    if not specs:
        raise UsageError(f"{choice}: no input states")
    return specs


def _limits(args) -> Limits:
    return Limits(max_nodes=args.max_nodes, max_photons=args.max_photons)


def _emit(obj: dict, as_json: bool, text: str) -> None:
    if as_json:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


# subcommands

def cmd_parse(args) -> int:
    path = Path(args.file)
    if not path.exists():
        raise UsageError(f"no such file: {args.file}")
    report = {"command": "parse", "file": str(path), "ok": False,
              "definitions": [], "diagnostics": []}
    try:
        program = parse(path.read_text())
    except CQPSyntaxError as exc:
        report["error"] = {"message": exc.message, "line": exc.line, "column": exc.column}
        _emit(report, args.json, f"{path}:{exc.line}:{exc.column}: syntax error: {exc.message}")
        return EXIT_SYNTAX
    report["definitions"] = program.names()
    try:
        diags = check_ownership(program)
    except CQPError as exc:
        report["error"] = {"message": str(exc), "line": None, "column": None}
        _emit(report, args.json, f"{path}: {exc}")
        return EXIT_SYNTAX
    report["diagnostics"] = [{"kind": d.kind, "name": d.name, "message": str(d)} for d in diags]
    report["ok"] = not diags
    lines = [f"{path}: {len(program.definitions)} definitions"]
    lines += [f"{path}: ownership: {d}" for d in diags]
    if not diags:
        lines.append(f"{path}: ok")
    _emit(report, args.json, "\n".join(lines))
    return EXIT_OK if not diags else EXIT_SYNTAX


def _format_outcome(outcome) -> str:
    return " ".join(f"{c}={','.join(str(v) for v in vals)}" for c, vals in outcome)


def cmd_run(args) -> int:
    name, program, kind = resolve(args.model)
    _top_level(name, program, kind)
    spec = _input(args.input)
    report = run(program, environment_for(spec, kind), name, _limits(args))
    body = report.to_dict()
    body.update({"command": "run", "input": spec.to_dict()})
    lines = [f"{name} on {spec.name()}: {body['lts']['nodes']} nodes, {body['lts']['edges']} edges"]
    for outcome, p in report.distribution:
        lines.append(f"  {_format_outcome(outcome)}  p={p:.9f}")
    if report.deadlocks:
        lines.append(f"  deadlocks: {len(report.deadlocks)}")
    _emit(body, args.json, "\n".join(lines))
    return EXIT_OK


def cmd_state(args) -> int:
    name, program, kind = resolve(args.model)
    _top_level(name, program, kind)
    if kind not in (ModelId.Model1, ModelId.Model2):
        raise UsageError("--at cnot-output needs a model with the beam-splitter CNOT block")
    spec = _input(args.input)
    state = cnot_output_state(kind, spec)
    amps = [{"basis": list(k), "re": a.real, "im": a.imag}
            for k, a in sorted(state.amplitudes.items()) if abs(a) > 1e-12]
    body = {"command": "state", "model": name, "input": spec.to_dict(), "at": args.at,
            "ports": list(CNOT_PORTS), "amplitudes": amps}
    lines = [f"{name} on {spec.name()} at {args.at}, ports |{''.join(CNOT_PORTS[:4])}>|{''.join(CNOT_PORTS[4:])}>"]
    for item in amps:
        k = "".join(str(v) for v in item["basis"])
        lines.append(f"  |{k[:4]}>|{k[4:]}>  {item['re']:+.9f}{item['im']:+.9f}j")
    _emit(body, args.json, "\n".join(lines))
    return EXIT_OK


def _equiv_one(job):
    a_prog, a_kind, b_prog, b_kind, spec, tol, limits = job
    t0 = time.perf_counter()
    ga = explore(a_prog, environment_for(spec, a_kind), limits)
    gb = explore(b_prog, environment_for(spec, b_kind), limits)
    verdict = check_pbb(ga, gb, tol)
    return verdict.to_dict(), ga.stats(), gb.stats(), time.perf_counter() - t0


def cmd_equiv(args) -> int:
    a_name, a_prog, a_kind = resolve(args.model_a)
    b_name, b_prog, b_kind = resolve(args.model_b)
    _top_level(a_name, a_prog, a_kind)
    _top_level(b_name, b_prog, b_kind)
    if OUTPUTS[a_kind] != OUTPUTS[b_kind]:
        raise UsageError(f"{a_name} and {b_name} have different visible channels")
    tol = args.tol if args.tol is not None else default_tolerance()
    specs = _inputs(args.inputs)
    jobs = [(a_prog, a_kind, b_prog, b_kind, s, tol, _limits(args)) for s in specs]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_equiv_one, jobs))
    else:
        results = [_equiv_one(j) for j in jobs]
    per_input = []
    lines = []
    for spec, (verdict, sa, sb, _) in zip(specs, results):
        per_input.append({"input": spec.to_dict(), "verdict": verdict,
                          "lts": {"A": sa, "B": sb}})
        word = "equivalent" if verdict["equivalent"] else "NOT equivalent"
        lines.append(f"{spec.name()}: {word} ({verdict['classes']} classes, "
                     f"{sa['nodes']}+{sb['nodes']} nodes)")
        if not verdict["equivalent"]:
            if verdict.get("reason"):
                lines.append(f"  {verdict['reason']}")
            for step in verdict["counterexample"] or []:
                lines.append(f"  [{step['side']}] {step['label']}")
    overall = all(r["verdict"]["equivalent"] for r in per_input)
    lines.append(f"{a_name} vs {b_name}: {'equivalent' if overall else 'NOT equivalent'} "
                 f"on {len(specs)} inputs (tol {tol:g})")
    body = {"command": "equiv", "model_a": a_name, "model_b": b_name, "tolerance": tol,
            "equivalent": overall, "results": per_input}
    _emit(body, args.json, "\n".join(lines))
    return EXIT_OK if overall else EXIT_DIFFERENT


def cmd_lts(args) -> int:
    name, program, kind = resolve(args.model)
    _top_level(name, program, kind)
    spec = _input(args.input)
    graph = explore(program, environment_for(spec, kind), _limits(args))
    body = {"command": "lts", "model": name, "input": spec.to_dict()}
    body.update(graph_to_dict(graph))
    Path(args.output).write_text(json.dumps(body, indent=2, sort_keys=True) + "\n")
    stats = graph.stats()
    sys.stdout.write(f"{name} on {spec.name()}: {stats['nodes']} nodes, {stats['edges']} edges "
                     f"written to {args.output}\n")
    return EXIT_OK


# argument parsing

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _explore_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-nodes", type=int, default=100_000)
    p.add_argument("--max-photons", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cqp-loqc", description="CQP interpreter and equivalence checker for LOQC models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("parse", help="check syntax and ownership of a .cqp file")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_parse)

    input_help = "00, 01, 10, 11, bell, or four amplitudes re[:im] separated by commas"
    p = sub.add_parser("run", help="explore a model and print its output distribution")
    p.add_argument("model")
    p.add_argument("--input", required=True, help=input_help)
    p.add_argument("--json", action="store_true")
    _explore_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("state", help="dump the joint state at a probe point")
    p.add_argument("model")
    p.add_argument("--input", required=True, help=input_help)
    p.add_argument("--at", choices=["cnot-output"], default="cnot-output")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_state)

    p = sub.add_parser("equiv", help="decide probabilistic branching bisimilarity per input")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--inputs", default="family", help="basis, family, or a file with one input per line")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json", action="store_true")
    _explore_flags(p)
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("lts", help="write the explored transition system as JSON")
    p.add_argument("model")
    p.add_argument("--input", required=True, help=input_help)
    p.add_argument("-o", "--output", required=True)
    _explore_flags(p)
    p.set_defaults(func=cmd_lts)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"cqp-loqc: {exc}\n")
        return EXIT_USAGE
    except CQPSyntaxError as exc:
        sys.stderr.write(f"cqp-loqc: {exc.line}:{exc.column}: syntax error: {exc.message}\n")
        return EXIT_SYNTAX
    except _OwnershipFailure as exc:
        sys.stderr.write(f"cqp-loqc: ownership: {exc}\n")
        return EXIT_SYNTAX
    except LimitExceeded as exc:
        sys.stderr.write(f"cqp-loqc: limit exceeded: {exc}\n")
        return EXIT_LIMIT


if __name__ == "__main__":
    sys.exit(main())
