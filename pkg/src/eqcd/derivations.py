"""
Builders for the bundled proof scripts.

Every script is produced by applying rules through prover.Derivation, so each
stored result is computed by the engine rather than typed by hand. Running

    python3 -m eqcd.derivations

rewrites src/eqcd/proofs/*.proof.json; tests check that the stored files equal
a fresh build.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import rules as R
from .ir import Circuit, Gate, box, circuit, gate
from .prover import Derivation, ProofScript, ProverError

SWAP = Gate((((0, 1), box("SWAP", R.SWAP_MATRIX)),))


def cx(c: int, t: int, power: float = 1.0) -> Gate:
    return gate({c: "dot", t: "oplus"}, power)


def frag(occ: dict, power: float = 1.0) -> dict:
    g = gate(occ)
    return R.fragment_to_dict(R.Fragment(g.occupants, power))


def identity_frag(wires: tuple) -> dict:
    return R.fragment_to_dict(R.Fragment(((tuple(wires), box("1", np.eye(2 ** len(wires)))),), 1.0))


def swap_adjacent(d: Derivation, i: int) -> Derivation:
    """Exchange elements i, i+1 by a structural move or by rule f in some flipflop variant."""
    els = d.current.elements
    x, y = els[i], els[i + 1]
    if not set(x.wires) & set(y.wires):
        return d.commute(i)
    target = list(els)
    target[i], target[i + 1] = y, x
    target_c = d.current.with_elements(target)
    for w in sorted(set(x.wires) & set(y.wires)):
        for variant in R.CONTROL_VARIANT["f"].values():
            for direction in ("forward", "backward"):
                rule = R.get_rule(variant)
                for out in R.rewrite_all(rule, d.current, i, direction, R.Binding(form=None, wires={"a": w})):
                    if R.circuits_equal(out, target_c):
                        return d.rule(variant, i, direction, wires={"a": w},
                                      pick=_index_of(rule, d.current, i, direction, w, target_c))
    raise ProverError(f"cannot exchange elements {i} and {i + 1}")


def _index_of(rule, c, i, direction, w, target) -> int:
    outs = R.rewrite_all(rule, c, i, direction, R.Binding(form=None, wires={"a": w}))
    return next(k for k, o in enumerate(outs) if R.circuits_equal(o, target))


def cancel_pair(d: Derivation, i: int, control: int) -> Derivation:
    """Adjacent equal involutions sharing a symbol on `control`: fuse by d, delete by C0."""
    kind = d.current.elements[i].atom_at(control)[1].kind
    d.rule(R.CONTROL_VARIANT["d"][kind], i, wires={"a": control})
    return d.rule("C0", i)


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------

def script_i_prime() -> ProofScript:
    from .prover import proof_i_prime
    s = proof_i_prime(gate({0: "dot", 1: "dot", 2: "oplus"}))
    return ProofScript(s.initial, s.steps, s.final, name="i_prime",
                       description="Toffoli is an involution: (d) with the first dot as control, then (C0)")


def script_g_from_def() -> ProofScript:
    initial = circuit(2, gate({1: "h"}), cx(0, 1))
    d = Derivation(initial, "g_from_def", "rule (g) for U = H, V = X from rules (d), (e) and (f)")
    d.rule("e", 0, wires={"a": 0})
    d.rule("d", 1, wires={"a": 0})
    d.rule("d", 1, "backward", wires={"a": 0}, binding={"fragments": {"U": frag({1: "dot"}), "V": frag({1: "h"})}})
    d.rule("f", 0, wires={"a": 0})
    d.rule("e", 1, "backward", wires={"a": 0})
    return d.script()


def _p_steps(d: Derivation, at: int, a: int, b: int) -> Derivation:
    """[•a, •b] at `at` → [∘a•b, •a∘b]."""
    d.rule("e", at + 1, wires={"a": a})
    d.rule("e", at, wires={"a": b})
    swap_adjacent(d, at + 1)
    cancel_pair(d, at + 2, a)
    swap_adjacent(d, at)
    return d


def script_p() -> ProofScript:
    d = Derivation(circuit(2, gate({0: "dot"}), gate({1: "dot"})), "p", "two unconnected dots as parity conditionals")
    return _p_steps(d, 0, 0, 1).script()


def _move(d: Derivation, src: int, dst: int) -> Derivation:
    while src > dst:
        swap_adjacent(d, src - 1)
        src -= 1
    while src < dst:
        swap_adjacent(d, src)
        src += 1
    return d


def _find(d: Derivation, g: Gate, start: int = 0) -> int:
    return next(k for k in range(start, len(d.current.elements)) if d.current.elements[k] == g)


def script_p3() -> ProofScript:
    d = Derivation(circuit(3, gate({0: "dot"}), gate({1: "dot"}), gate({2: "dot"})), "p3",
                   "three unconnected dots as the four odd-parity conditionals")
    _p_steps(d, 0, 0, 1)                              # [∘•, •∘, •c]
    d.rule("e", 2, wires={"a": 0})                     # [∘•, •∘, ∘·•c, •·•c]
    d.rule("e", 2, wires={"a": 1})                     # [.., ∘∘•, ∘•• , •·•c]
    d.rule("e", 4, wires={"a": 1})                     # [∘•, •∘, ∘∘•, ∘••, •∘•, •••]
    d.rule("e", 0, wires={"a": 2})                     # [∘•∘, ∘••, •∘, ∘∘•, ∘••, •∘•, •••]
    d.rule("e", 2, wires={"a": 2})                     # [∘•∘, ∘••, •∘∘, •∘•, ∘∘•, ∘••, •∘•, •••]
    _move(d, _find(d, gate({0: "odot", 1: "dot", 2: "dot"}), 2), 2)
    cancel_pair(d, 1, 0)
    _move(d, _find(d, gate({0: "dot", 1: "odot", 2: "dot"}), 3), 3)
    cancel_pair(d, 2, 0)
    order = [gate({0: "odot", 1: "odot", 2: "dot"}), gate({0: "odot", 1: "dot", 2: "odot"}),
             gate({0: "dot", 1: "odot", 2: "odot"}), gate({0: "dot", 1: "dot", 2: "dot"})]
    for k, g in enumerate(order):
        _move(d, _find(d, g), k)
    return d.script()


def script_fivecx() -> ProofScript:
    initial = circuit(3, cx(1, 2), cx(0, 1), cx(1, 2))
    d = Derivation(initial, "fivecx", "three partially overlapping CNOTs equal two CNOTs sharing a control")
    d.rule("e", 0, wires={"a": 0})
    d.rule("e", 3, wires={"a": 0})
    swap_adjacent(d, 2)
    swap_adjacent(d, 1)
    cancel_pair(d, 0, 0)
    d.rule("d", 0, wires={"a": 0})
    d.rule("d", 0, wires={"a": 0})
    d.rule("d", 0, "backward", wires={"a": 0}, binding={"fragments": {"U": frag({1: "oplus"}), "V": frag({2: "oplus"})}})
    return d.script()


def _swap_pair_cancel(d: Derivation, at: int) -> Derivation:
    """[SWAP, SWAP] at `at` → [] through rule (s) and three CNOT cancellations."""
    d.rule("s", at, wires={"a": 0, "b": 1})
    d.rule("s", at + 3, wires={"a": 0, "b": 1})
    cancel_pair(d, at + 2, 0)
    cancel_pair(d, at + 1, 1)
    cancel_pair(d, at, 0)
    return d


def script_t_prime() -> ProofScript:
    initial = circuit(2, SWAP, cx(0, 1), SWAP)
    d = Derivation(initial, "t_prime", "a gate sandwiched by SWAPs is turned upside-down; SWAP is an involution")
    d.rule("t", 0, wires={"a": 0, "b": 1})
    _swap_pair_cancel(d, 1)
    return d.script()


def script_z() -> ProofScript:
    alpha = 0.25
    initial = circuit(2, cx(0, 1), gate({1: "dot"}, alpha), cx(0, 1))
    d = Derivation(initial, "z", "a phase between two CNOTs becomes two conditionals (alpha = 1/4)")
    d.rule("e", 1, wires={"a": 0})
    swap_adjacent(d, 0)
    d.rule("d", 1, wires={"a": 0})
    d.rule("d", 1, wires={"a": 0})
    d.rule("d", 1, "backward", wires={"a": 0},
           binding={"fragments": {"U": frag({1: "odot"}, alpha), "V": identity_frag((1,))}})
    d.rule("C0", 2)
    return d.script()


def script_error_propagation_z() -> ProofScript:
    initial = circuit(2, gate({1: "dot"}), cx(0, 1))
    d = Derivation(initial, "error_propagation_Z", "a Z passing the target of a CNOT is copied to the control")
    d.rule("e", 0, wires={"a": 0})
    swap_adjacent(d, 0)
    swap_adjacent(d, 1)
    d.rule("d", 0, wires={"a": 0})
    d.rule("d", 0, "backward", wires={"a": 0}, binding={"fragments": {"U": frag({1: "oplus"}), "V": frag({1: "odot"})}})
    # parity rule backwards on [•∘, ∘•] at 1
    d.rule("C0", 3, "backward", binding={"atoms": {"I": {"wires": [1], "atom": {"box": {"name": "1", "wires": [1],
                                         "matrix": [[[1, 0], [0, 0]], [[0, 0], [1, 0]]]}}}},
                                         "fragments": {"U": frag({0: "dot"})}, "powers": {"alpha": 1.0}})
    d.rule("d", 3, "backward", wires={"a": 0},
           binding={"fragments": {"U": frag({1: "dot"}), "V": frag({1: "dot"})}})
    swap_adjacent(d, 2)
    d.rule("e", 3, "backward", wires={"a": 0})
    d.rule("e", 1, "backward", wires={"a": 1})
    return d.script()


def script_qft2_squared() -> ProofScript:
    from .catalog import build
    q = build("qft", n=2)
    initial = q + q
    d = Derivation(initial, "qft2_squared", "QFT2 squared reduces to the upside-down CNOT")
    for k in range(3):
        d.rule("t", 3 + k, wires={"a": 0, "b": 1})
    _swap_pair_cancel(d, 6)
    d.rule("i", 2, binding={"form": 2})
    d.rule("n_add", 1)
    # [H0, ••, H0]: expand both Hadamards along wire 1 and fuse the •-branch into X
    d.rule("e", 0, wires={"a": 1})
    d.rule("e", 3, wires={"a": 1})
    swap_adjacent(d, 2)
    swap_adjacent(d, 1)
    cancel_pair(d, 0, 1)
    d.rule("d", 0, wires={"a": 1})
    d.rule("d", 0, wires={"a": 1})
    d.rule("d", 0, "backward", wires={"a": 1},
           binding={"fragments": {"U": frag({0: "oplus"}), "V": identity_frag((0,))}})
    d.rule("C0", 1)
    return d.script()


BUILDERS = {
    "i_prime": script_i_prime, "g_from_def": script_g_from_def, "p": script_p, "p3": script_p3,
    "fivecx": script_fivecx, "t_prime": script_t_prime, "z": script_z,
    "error_propagation_Z": script_error_propagation_z, "qft2_squared": script_qft2_squared,
}


def proofs_dir() -> Path:
    return Path(__file__).resolve().parent / "proofs"


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="rebuild the bundled proof scripts")
    ap.add_argument("names", nargs="*", default=list(BUILDERS))
    ap.add_argument("--out", type=Path, default=proofs_dir())
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for name in args.names:
        script = BUILDERS[name]()
        (args.out / f"{name}.proof.json").write_text(script.dumps(), encoding="utf-8")
        print(f"{name}: {len(script.steps)} steps", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
