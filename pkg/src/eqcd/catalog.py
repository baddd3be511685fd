"""
Named circuit builders for the worked examples (wire 0 is the top wire).

Contains:
    - CatalogEntry, ENTRIES, names(), entry(), build(), context_for(), kept_for()
    - parse_param(): CLI "k=v" value parsing (ints, floats, fractions, bit strings)
    - reference circuits: qft(n), the reduced QFT3², the upside-down CNOT, the mirror example V

Entries that need fixed inputs (ancillas prepared in |0⟩, the |+⟩ of the H
gadget, Deutsch's |1⟩) carry a Context and the kept output wires.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

import numpy as np

from .ir import Circuit, Context, Gate, Measurement, box, circuit, gate

SWAP_MATRIX = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


class CatalogError(ValueError):
    pass


def swap_gate(a: int, b: int) -> Gate:
    return Gate((((a, b), box("SWAP", SWAP_MATRIX)),))


def cx(c: int, t: int, power: float = 1.0, cc=()) -> Gate:
    return gate({c: "dot", t: "oplus"}, power, cc)


def h(w: int) -> Gate:
    return gate({w: "h"})


def z(w: int, power: float = 1.0, cc=()) -> Gate:
    return gate({w: "dot"}, power, cc)


def x(w: int, power: float = 1.0, cc=()) -> Gate:
    return gate({w: "oplus"}, power, cc)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def qft(n: int = 2) -> Circuit:
    """H and controlled •^{1/2^{k-1}} ladders followed by the wire-reversal SWAPs."""
    _check_range("n", n, 1, 6)
    els: list = []
    for j in range(n):
        els.append(h(j))
        for k in range(j + 1, n):
            els.append(gate({j: "dot", k: "dot"}, 1.0 / 2 ** (k - j)))
    for j in range(n // 2):
        els.append(swap_gate(j, n - 1 - j))
    return Circuit(n, tuple(els))


def qft_squared(n: int = 2) -> Circuit:
    q = qft(n)
    return q + q


def qft3_squared_reduced() -> Circuit:
    """Final three-gate classical circuit of the QFT3² reduction."""
    return circuit(3, gate({0: "oplus", 1: "dot", 2: "dot"}), cx(2, 1), cx(1, 0))


def upside_down_cnot() -> Circuit:
    return circuit(2, cx(1, 0))


def negation_permutation(n: int) -> np.ndarray:
    """|k⟩ ↦ |−k mod 2ⁿ⟩ as a permutation matrix."""
    d = 2 ** n
    p = np.zeros((d, d), dtype=complex)
    for k in range(d):
        p[(-k) % d, k] = 1
    return p


def mirror_example() -> Circuit:
    """Three-wire circuit V used to illustrate the mirror-image adjoint."""
    return circuit(3, h(0), gate({0: "dot", 1: "dot"}, 0.5), gate({0: "oplus", 2: "dot"}), x(1, -math.e),
                   z(2, 1 / 3), cx(1, 2), gate({1: "oplus", 2: "dot"}))


def teleportation() -> Circuit:
    return circuit(3, h(1), cx(1, 2), cx(0, 1), h(0), Measurement(1, "m1"), Measurement(0, "m0"),
                   x(2, cc=("m1",)), z(2, cc=("m0",)))


def superdense(a: int = 0, b: int = 0) -> Circuit:
    """Quantized form: wires 0,1 hold |a⟩,|b⟩ and are measured to drive the corrections."""
    _bit("a", a)
    _bit("b", b)
    return circuit(4, h(2), cx(2, 3), Measurement(1, "b"), x(2, cc=("b",)), Measurement(0, "a"),
                   z(2, cc=("a",)), cx(2, 3), h(2))


def entanglement_swap() -> Circuit:
    return circuit(4, h(0), h(3), cx(0, 1), cx(3, 2), cx(1, 2), h(1), Measurement(1, "m1"), Measurement(2, "m2"),
                   z(0, cc=("m1",)), x(3, cc=("m2",)))


def h_gadget() -> Circuit:
    """fSWAP (SWAP then CZ), measure wire 0 in the H basis, classically controlled X on wire 1."""
    return circuit(2, swap_gate(0, 1), gate({0: "dot", 1: "dot"}), Measurement(0, "m", box("H", _H)),
                   x(1, cc=("m",)))


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def dodo_12_1_1() -> Circuit:
    cols = [
        [cx(0, 1), cx(2, 3)],
        [x(0, 0.25), x(2, -0.25)],
        [z(0, -0.5), cx(2, 3)],
        [x(0, 0.25), cx(1, 2)],
        [cx(0, 1), cx(2, 3)],
        [z(1, -0.25), x(2, 0.25)],
        [cx(0, 1), cx(2, 3)],
        [cx(1, 2)],
    ]
    els = [g for col in cols for g in col] + [Measurement(0, "m0"), Measurement(1, "m1")]
    return Circuit(4, tuple(els))


def deutsch(b: int = 0, c: int = 0) -> Circuit:
    """Textbook Deutsch with the oracle indexed by powers b, c; input |0⟩|1⟩."""
    _bit("b", b)
    _bit("c", c)
    return circuit(2, h(0), h(1), cx(0, 1, float(int(b))), x(1, float(int(c))), h(0), h(1))


def _bits(name: str, v, n: int | None = None) -> list:
    try:
        v = [int(t) for t in v]
    except (TypeError, ValueError):
        raise CatalogError(f"{name} must be a non-empty bit string, got {v!r}") from None
    if any(t not in (0, 1) for t in v) or not v:
        raise CatalogError(f"{name} must be a non-empty bit string")
    if n is not None and len(v) != n:
        raise CatalogError(f"{name} must have length {n}")
    if len(v) > 5:
        raise CatalogError(f"{name} has {len(v)} bits; at most 5 input wires are supported")
    return v


def deutsch_jozsa(b: Any = "10", c: int = 0) -> Circuit:
    """n input wires, one output wire; the oracle XORs b·x ⊕ c onto the last wire."""
    bv = _bits("b", b)
    _bit("c", c)
    n = len(bv)
    els = [h(k) for k in range(n + 1)]
    els += [cx(k, n, float(bk)) for k, bk in enumerate(bv)]
    els.append(x(n, float(c)))
    els += [h(k) for k in range(n + 1)]
    return Circuit(n + 1, tuple(els))


def bernstein_vazirani(s: Any = "101") -> Circuit:
    sv = _bits("s", s)
    n = len(sv)
    els = [h(k) for k in range(n + 1)]
    els += [cx(k, n) for k, sk in enumerate(sv) if sk]
    els += [h(k) for k in range(n + 1)]
    return Circuit(n + 1, tuple(els))


def grover_iterations(n: int) -> int:
    return int(math.floor(math.sqrt(2 ** n) * math.pi / 4))


def grover(n: int = 3, x: Any = "101", iters: int | None = None) -> Circuit:
    """H on every wire, then [oracle e^{iπ|x⟩⟨x|}, diffusion e^{iπ|+ⁿ⟩⟨+ⁿ|}] repeated."""
    _check_range("n", n, 1, 6)
    xv = _bits("x", x, n) if n <= 5 else [int(ch) for ch in str(x)]
    iters = grover_iterations(n) if iters is None else int(iters)
    if iters < 0:
        raise CatalogError("iters must be non-negative")
    oracle = gate({k: ("dot" if xk else "odot") for k, xk in enumerate(xv)})
    diffusion = gate({k: "ominus" for k in range(n)})
    els = [h(k) for k in range(n)] + [oracle, diffusion] * iters
    return Circuit(n, tuple(els))


def phase_estimation(n: int = 3, phi: Any = "5/8", form: str = "interleaved") -> Circuit:
    """Phase estimation after kickback; `form` is "interleaved" or "textbook"."""
    _check_range("n", n, 1, 6)
    try:
        phi = float(Fraction(phi)) if isinstance(phi, str) else float(phi)
    except (ValueError, ZeroDivisionError) as exc:
        raise CatalogError(f"phi must be a number or fraction, got {phi!r}") from exc
    if form == "textbook":
        from .ir import adjoint
        els = [h(k) for k in range(n)] + [z(k, 2 ** (n - k) * phi) for k in range(n)]
        return Circuit(n, tuple(els)) + adjoint(qft(n))
    if form != "interleaved":
        raise CatalogError(f"form must be 'interleaved' or 'textbook', got {form!r}")
    els = [x(n - 1, 2 ** n * phi)]
    for j in range(n - 2, -1, -1):
        for m in range(n - 1, j, -1):
            els.append(gate({j: "oplus", m: "dot"}, -1.0 / 2 ** (m - j)))
        els.append(x(j, 2 ** (j + 1) * phi))
    return Circuit(n, tuple(els))


def _bit(name: str, v) -> None:
    if int(v) not in (0, 1):
        raise CatalogError(f"{name} must be 0 or 1")


def _check_range(name: str, v, lo: int, hi: int) -> None:
    if not isinstance(v, int) or not lo <= v <= hi:
        raise CatalogError(f"{name} must be an integer in [{lo}, {hi}], got {v!r}")


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CatalogEntry:
    name: str
    builder: Callable
    description: str
    params: dict = field(default_factory=dict)
    context: Callable | None = None
    kept: Callable | None = None
    labels: dict = field(default_factory=dict)

    def build(self, **params) -> Circuit:
        unknown = set(params) - set(self.params)
        if unknown:
            raise CatalogError(f"{self.name}: unknown parameter(s) {sorted(unknown)}; accepts {sorted(self.params)}")
        return self.builder(**{**self.params, **params})


def _zeros(n: int, extra: dict | None = None) -> Context:
    return Context({**{k: "0" for k in range(n)}, **(extra or {})})


def _dj_ctx(p: dict) -> Context:
    n = len(_bits("b", p["b"]))
    return Context({**{k: "0" for k in range(n)}, n: "1"})


def _bv_ctx(p: dict) -> Context:
    n = len(_bits("s", p["s"]))
    return Context({**{k: "0" for k in range(n)}, n: "1"})


ENTRIES = {e.name: e for e in [
    CatalogEntry("cnot", lambda: circuit(2, cx(0, 1)), "CNOT, control on wire 0"),
    CatalogEntry("cz", lambda: circuit(2, gate({0: "dot", 1: "dot"})), "CZ"),
    CatalogEntry("toffoli", lambda: circuit(3, gate({0: "dot", 1: "dot", 2: "oplus"})), "Toffoli, target on wire 2"),
    CatalogEntry("ccz", lambda: circuit(3, gate({0: "dot", 1: "dot", 2: "dot"})), "CCZ"),
    CatalogEntry("swap", lambda: circuit(2, swap_gate(0, 1)), "SWAP as a box"),
    CatalogEntry("fswap", lambda: circuit(2, swap_gate(0, 1), gate({0: "dot", 1: "dot"})), "fSWAP: SWAP then CZ"),
    CatalogEntry("iswap", lambda: circuit(2, swap_gate(0, 1), gate({0: "dot", 1: "dot"}), z(0, 0.5), z(1, 0.5)),
                 "iSWAP: fSWAP then S on both wires"),
    CatalogEntry("bell", lambda: circuit(2, h(0), cx(0, 1)), "Bell gate: H on wire 0 then CNOT",
                 labels={0: "A", 1: "B"}),
    CatalogEntry("qft", qft, "standard QFT_n", {"n": 2}),
    CatalogEntry("qft_squared", qft_squared, "QFT_n applied twice", {"n": 2}),
    CatalogEntry("qft2_squared", lambda: qft_squared(2), "QFT_2 applied twice"),
    CatalogEntry("qft3_squared_reduced", qft3_squared_reduced, "classical three-gate form of QFT_3 squared"),
    CatalogEntry("upside_down_cnot", upside_down_cnot, "CNOT with control on wire 1"),
    CatalogEntry("mirror_example", mirror_example, "three-wire circuit V whose mirror image is V†"),
    CatalogEntry("teleportation", teleportation, "teleport wire 0 to wire 2",
                 context=lambda p: Context({1: "0", 2: "0"}), kept=lambda p: [2],
                 labels={0: "Alice ψ", 1: "Alice", 2: "Bob"}),
    CatalogEntry("superdense", superdense, "superdense coding with quantized bits a (wire 0), b (wire 1)",
                 {"a": 0, "b": 0},
                 context=lambda p: Context({0: str(int(p["a"])), 1: str(int(p["b"])), 2: "0", 3: "0"}),
                 kept=lambda p: [2, 3], labels={0: "a", 1: "b", 2: "Alice→Bob", 3: "Bob"}),
    CatalogEntry("entanglement_swap", entanglement_swap, "Bell measurement on wires 1,2 entangles wires 0 and 3",
                 context=lambda p: _zeros(4), kept=lambda p: [0, 3], labels={0: "Alice", 3: "Bob"}),
    CatalogEntry("h_gadget", h_gadget, "measurement-based Hadamard on wire 1",
                 context=lambda p: Context({0: "+"}), kept=lambda p: [1]),
    CatalogEntry("dodo_12_1_1", dodo_12_1_1, "four-wire ZX example; wires 0,1 are |0⟩ ancillas",
                 context=lambda p: Context({0: "0", 1: "0"}), kept=lambda p: [2, 3]),
    CatalogEntry("deutsch", deutsch, "Deutsch with oracle powers b, c", {"b": 0, "c": 0},
                 context=lambda p: Context({0: "0", 1: "1"})),
    CatalogEntry("deutsch_jozsa", deutsch_jozsa, "Deutsch-Jozsa with oracle bits b and constant c",
                 {"b": "10", "c": 0}, context=_dj_ctx),
    CatalogEntry("bernstein_vazirani", bernstein_vazirani, "Bernstein-Vazirani with secret s", {"s": "101"},
                 context=_bv_ctx),
    CatalogEntry("grover", grover, "Grover search for one marked string x", {"n": 3, "x": "101", "iters": None},
                 context=lambda p: _zeros(p["n"])),
    CatalogEntry("phase_estimation", phase_estimation, "phase estimation after kickback",
                 {"n": 3, "phi": "5/8", "form": "interleaved"}, context=lambda p: _zeros(p["n"])),
]}


def names() -> list:
    return sorted(ENTRIES)


def entry(name: str) -> CatalogEntry:
    if name not in ENTRIES:
        raise CatalogError(f"unknown catalog entry {name!r}; choose from {', '.join(names())}")
    return ENTRIES[name]


def build(name: str, **params) -> Circuit:
    return entry(name).build(**params)


def _params(name: str, params: dict) -> dict:
    return {**entry(name).params, **params}


def context_for(name: str, **params) -> Context | None:
    e = entry(name)
    return e.context(_params(name, params)) if e.context else None


def kept_for(name: str, **params) -> list | None:
    e = entry(name)
    return e.kept(_params(name, params)) if e.kept else None


def parse_param(text: str) -> tuple:
    """"k=v" → (k, value); integers, floats and fractions are converted, bit strings kept."""
    if "=" not in text:
        raise CatalogError(f"parameter {text!r} must look like key=value")
    k, v = text.split("=", 1)
    k, v = k.strip(), v.strip()
    if k in ("b", "s", "x", "form"):
        return k, v
    try:
        return k, int(v)
    except ValueError:
        pass
    try:
        return k, float(Fraction(v))
    except (ValueError, ZeroDivisionError):
        return k, v
