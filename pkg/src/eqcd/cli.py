"""
Command-line front end: one JSON document on stdout per invocation.

Exit status: 0 success or equivalent, 1 verification failed or not
equivalent, 2 malformed input (stdout carries {"error", "path"}).

    eqcd semantics c.json [--hamiltonian]
    eqcd verify a.json b.json [--mode exact|phase|channel|context] [--ctx ctx.json] [--tol 1e-9]
    eqcd prove script.json [--strict]
    eqcd simplify c.json [--max-iters 1000]
    eqcd rules list | eqcd rules check [--samples 100] [--seed 42] [--tol 1e-9]
    eqcd control c.json|matrix.json
    eqcd catalog NAME [--param k=v ...] [-o out.json]
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import catalog, control, ir, prover
from . import rules as R
from . import semantics as sem

DEFAULT_SEED = 42


class InputError(Exception):
    def __init__(self, message: str, path: str = "$"):
        super().__init__(message)
        self.path = path


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise InputError(message, "argv")


def _default_seed() -> int:
    raw = os.environ.get("EQCD_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"EQCD_SEED must be an integer, got {raw!r}", "env.EQCD_SEED") from None


def _read_json(path: str) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}", path) from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid JSON in {path}: {exc.msg} at line {exc.lineno}", path) from None


def _circuit(path: str) -> ir.Circuit:
    data = _read_json(path)
    try:
        return ir.from_dict(data)
    except ir.ParseError as exc:
        raise InputError(f"{path}: {exc}", exc.path) from None


def _matrix_or_circuit(path: str):
    data = _read_json(path)
    if isinstance(data, list) or (isinstance(data, dict) and "matrix" in data):
        raw = data["matrix"] if isinstance(data, dict) else data
        try:
            return ir.matrix_from_json(raw, "$.matrix" if isinstance(data, dict) else "$")
        except ir.ParseError as exc:
            raise InputError(f"{path}: {exc}", exc.path) from None
    try:
        return ir.from_dict(data)
    except ir.ParseError as exc:
        raise InputError(f"{path}: {exc}", exc.path) from None


def _matrix_json(m: np.ndarray) -> list:
    return ir.matrix_to_json(np.where(np.abs(m) < 1e-15, 0, m))


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_semantics(args) -> tuple:
    c = _circuit(args.circuit)
    if c.has_measurements or c.has_classical_controls:
        return 0, {"n_wires": c.n_wires, "kind": "channel", "choi": _matrix_json(sem.circuit_channel(c))}
    u = sem.circuit_unitary(c)
    out: dict[str, Any] = {"n_wires": c.n_wires, "kind": "unitary", "matrix": _matrix_json(u)}
    if args.hamiltonian:
        out["hamiltonian"] = _matrix_json(sem.principal_hamiltonian(u))
    return 0, out


def cmd_verify(args) -> tuple:
    a, b = _circuit(args.a), _circuit(args.b)
    ctx = None
    if args.ctx:
        try:
            ctx = ir.context_from_dict(_read_json(args.ctx))
        except ir.ParseError as exc:
            raise InputError(f"{args.ctx}: {exc}", exc.path) from None
    if args.mode == "context" and ctx is None:
        raise InputError("--mode context needs --ctx", "argv")
    try:
        v = sem.equivalent(a, b, args.mode, args.tol, ctx)
    except sem.SemanticsError as exc:
        raise InputError(str(exc), "$") from None
    return (0 if v.verdict else 1), {"equivalent": v.verdict, "deviation": v.deviation, "mode": args.mode,
                                     "tol": args.tol}


def cmd_prove(args) -> tuple:
    path = Path(args.script)
    if not path.exists() and args.script in prover.BUNDLED:
        script = prover.bundled_script(args.script)
    else:
        text = _read_json(args.script)
        try:
            script = prover.script_from_dict(text)
        except ir.ParseError as exc:
            raise InputError(f"{args.script}: {exc}", exc.path) from None
    rep = prover.verify_script(script, strict=args.strict)
    return (0 if rep.ok else 1), {"name": script.name, **rep.to_dict()}


def cmd_simplify(args) -> tuple:
    c = _circuit(args.circuit)
    res = prover.simplify(c, args.max_iters)
    return 0, res.to_dict()


def cmd_rules(args) -> tuple:
    if args.action == "list":
        rows = []
        for r in R.base_ruleset() + R.derived_rules():
            rows.append({"name": r.name, "derived": r.derived, "forms": len(r.forms), "description": r.description,
                         "variants": [v.full_name for v in R.closure(r)]})
        return 0, {"rules": rows}
    seed = args.seed if args.seed is not None else _default_seed()
    rep = prover.soundness_suite(seed, args.samples, args.tol)
    return (0 if rep.passed else 1), rep.to_dict()


def cmd_control(args) -> tuple:
    obj = _matrix_or_circuit(args.input)
    gate = None
    if isinstance(obj, ir.Circuit):
        if obj.has_measurements or obj.has_classical_controls:
            raise InputError("control analysis needs a unitary circuit", "$.elements")
        u = sem.circuit_unitary(obj)
        if len(obj.elements) == 1:
            gate = obj.elements[0]
    else:
        u = obj
    dim = u.shape[0]
    out: dict[str, Any] = {"dimension": dim}
    try:
        if dim == 4:
            out["classification"] = control.classify(u).to_dict()
        if dim in (2, 4, 8):
            out["diagonalization"] = control.diagonalize(u).to_dict()
        if gate is not None:
            out["interpretations"] = [i.to_dict() for i in control.interpretations(gate)]
    except control.ControlError as exc:
        raise InputError(str(exc), "$") from None
    if len(out) == 1:
        raise InputError(f"control analysis supports 1 to 3 qubits, got dimension {dim}", "$")
    return 0, out


def cmd_catalog(args) -> tuple:
    try:
        if args.name == "list":
            return 0, {"entries": [{"name": n, "description": catalog.entry(n).description,
                                    "params": catalog.entry(n).params} for n in catalog.names()]}
        params = dict(catalog.parse_param(p) for p in args.param)
        c = catalog.build(args.name, **params)
    except catalog.CatalogError as exc:
        raise InputError(str(exc), "argv") from None
    doc = ir.to_dict(c)
    if args.output:
        Path(args.output).write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")
    return 0, doc


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="eqcd", description="extended quantum circuit diagram toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("semantics", help="matrix (and principal Hamiltonian) of a circuit")
    s.add_argument("circuit")
    s.add_argument("--hamiltonian", action="store_true")
    s.set_defaults(fn=cmd_semantics)

    s = sub.add_parser("verify", help="compare two circuits")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--mode", choices=("exact", "phase", "channel", "context"), default="exact")
    s.add_argument("--ctx")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("prove", help="replay a proof script")
    s.add_argument("script", help="script path, or a bundled script name")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(fn=cmd_prove)

    s = sub.add_parser("simplify", help="apply the normalizing rewrites")
    s.add_argument("circuit")
    s.add_argument("--max-iters", type=int, default=1000)
    s.set_defaults(fn=cmd_simplify)

    s = sub.add_parser("rules", help="list the ruleset or check its soundness")
    s.add_argument("action", choices=("list", "check"))
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(fn=cmd_rules)

    s = sub.add_parser("control", help="controlledness, diagonalization and interpretations")
    s.add_argument("input")
    s.set_defaults(fn=cmd_control)

    s = sub.add_parser("catalog", help="emit a named circuit ('list' shows the names)")
    s.add_argument("name")
    s.add_argument("--param", action="append", default=[])
    s.add_argument("-o", "--output")
    s.set_defaults(fn=cmd_catalog)
    return p


def run(argv=None) -> tuple:
    """(exit code, JSON-ready document)."""
    try:
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except InputError as exc:
        print(f"eqcd: {exc}", file=sys.stderr)
        return 2, {"error": str(exc), "path": exc.path}
    except (ir.ParseError, prover.ProverError, sem.SemanticsError, ir.IRError) as exc:
        print(f"eqcd: {exc}", file=sys.stderr)
        return 2, {"error": str(exc), "path": getattr(exc, "path", "$")}


def main(argv=None) -> int:
    code, doc = run(argv)
    sys.stdout.write(json.dumps(doc, ensure_ascii=False) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
