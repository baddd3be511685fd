"""
Controlledness analysis for two-qubit unitaries, semi-classical readings of
conditionals, and diagonalization into symbol conditionals.

Contains:
    - local_commutant(), partial_eigenbasis(), classify() → ControlReport
    - interpretations(gate) → list of Interpretation
    - diagonalize(U) → Diagonalization, is_diagonal_form()
    - schmidt_coefficients(), max_concurrence_vector()

Qubit 0 is the first (most significant) tensor factor, matching the circuit
convention that wire 0 is the top wire.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .ir import Atom, Circuit, Gate, box, matrix_to_json, permute_qubits, to_dict
from .semantics import atom_hamiltonian, exp_hermitian, gate_local, max_norm, spectral, unitarity_residual

COMMUTANT_TOL = 1e-9
BLOCK_TOL = 1e-9
DEGENERACY_GAP = 1e-6
SCHMIDT_TOL = 1e-6

BOTH = "BothControlled"
ONE = "OneControlled"
NONE = "Uncontrolled"

STATE_LABEL = {"dot": "1", "odot": "0", "oplus": "-", "ominus": "+"}

_I2 = np.eye(2, dtype=complex)


class ControlError(ValueError):
    pass


def _check_unitary(u, dim: int | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or (dim is not None and u.shape[0] != dim):
        want = f"{dim}x{dim}" if dim else "square"
        raise ControlError(f"expected a {want} matrix, got shape {u.shape}")
    if unitarity_residual(u) > 1e-9:
        raise ControlError(f"matrix is not unitary (residual {unitarity_residual(u):.3g})")
    return u


def _mj(m) -> list:
    """JSON matrix with round-off below 1e-15 written as exact zeros."""
    m = np.asarray(m, dtype=complex)
    return matrix_to_json(np.where(np.abs(m.real) < 1e-15, 0, m.real) + 1j * np.where(np.abs(m.imag) < 1e-15, 0, m.imag))


def _lift(m: np.ndarray, qubit: int) -> np.ndarray:
    return np.kron(m, _I2) if qubit == 0 else np.kron(_I2, m)


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(v) > 1e-9))
    return v * (abs(v[k]) / v[k])


# ---------------------------------------------------------------------------
# Partial eigenbases
# ---------------------------------------------------------------------------

def local_commutant(u, qubit: int) -> list:
    """Frobenius-orthonormal basis of {M : U(M⊗I) = (M⊗I)U} (or I⊗M for qubit 1)."""
    u = _check_unitary(u, 4)
    if qubit not in (0, 1):
        raise ControlError(f"qubit must be 0 or 1, got {qubit}")
    cols = []
    for k in range(4):
        e = np.zeros(4, dtype=complex)
        e[k] = 1
        m = _lift(e.reshape(2, 2), qubit)
        cols.append((u @ m - m @ u).reshape(-1))
    a = np.stack(cols, axis=1)
    _, sv, vh = np.linalg.svd(a)
    return [vh[k].conj().reshape(2, 2) for k in range(4) if sv[k] < COMMUTANT_TOL]


@dataclass(frozen=True)
class PartialEigenbasis:
    qubit: int
    vectors: tuple
    conditionals: tuple

    def block_form(self) -> np.ndarray:
        out = np.zeros((4, 4), dtype=complex)
        for a, ua in zip(self.vectors, self.conditionals):
            p = np.outer(a, a.conj())
            out += np.kron(p, ua) if self.qubit == 0 else np.kron(ua, p)
        return out

    def residual(self, u) -> float:
        return max_norm(np.asarray(u) - self.block_form())

    @property
    def commuting(self) -> bool:
        a, b = self.conditionals
        return max_norm(a @ b - b @ a) < COMMUTANT_TOL

    def to_dict(self) -> dict:
        return {"qubit": self.qubit, "vectors": [_mj(np.atleast_2d(v))[0] for v in self.vectors],
                "conditionals": [_mj(c) for c in self.conditionals], "commuting": self.commuting}


def _hermitian_non_scalar(m: np.ndarray):
    for h in (0.5 * (m + m.conj().T), 0.5j * (m - m.conj().T)):
        if max_norm(h - np.trace(h) / 2 * _I2) > COMMUTANT_TOL:
            return h
    return None


def partial_eigenbasis(u, qubit: int) -> PartialEigenbasis | None:
    """A basis {|a₀⟩,|a₁⟩} of `qubit` under which U is block diagonal, or None."""
    u = _check_unitary(u, 4)
    comm = local_commutant(u, qubit)
    if len(comm) < 2:
        return None
    if len(comm) == 4:
        h = np.diag([0.0, 1.0]).astype(complex)
    else:
        h = next((x for x in map(_hermitian_non_scalar, comm) if x is not None), None)
        if h is None:
            return None
    _, vecs = np.linalg.eigh(h)
    vs = sorted((_canonical_phase(vecs[:, k]) for k in range(2)),
                key=lambda v: (-round(abs(v[0]), 9), round(float(np.mod(np.angle(v[1] / v[0]), 2 * np.pi))
                                                             if abs(v[0]) > 1e-9 else 0.0, 9)))
    conds = []
    for a in vs:
        iso = _lift(a.reshape(2, 1), qubit)
        ua = iso.conj().T @ u @ iso
        if unitarity_residual(ua) > BLOCK_TOL:
            raise ControlError(f"conditional on qubit {qubit} is not unitary")
        conds.append(ua)
    pb = PartialEigenbasis(qubit, tuple(vs), tuple(conds))
    if pb.residual(u) > BLOCK_TOL:
        raise ControlError(f"block form on qubit {qubit} does not reproduce the gate")
    return pb


# ---------------------------------------------------------------------------
# Entanglement helpers
# ---------------------------------------------------------------------------

def schmidt_coefficients(v) -> np.ndarray:
    return np.linalg.svd(np.asarray(v, dtype=complex).reshape(2, 2), compute_uv=False)


def max_concurrence_vector(span: np.ndarray, iters: int = 500) -> np.ndarray:
    """Unit vector in the column span with the largest concurrence 2|det ψ|.

    det(reshape(Sc)) = cᵀQc for a complex symmetric Q; the maximizer is a
    Takagi vector of Q, found by the antilinear iteration c ← conj(Qc).
    """
    span = np.asarray(span, dtype=complex)
    d = span.shape[1]
    if d == 1:
        return span[:, 0]
    mats = [span[:, k].reshape(2, 2) for k in range(d)]
    q = np.zeros((d, d), dtype=complex)
    for i in range(d):
        for j in range(d):
            a, b = mats[i], mats[j]
            q[i, j] = 0.5 * (a[0, 0] * b[1, 1] + b[0, 0] * a[1, 1] - a[0, 1] * b[1, 0] - b[0, 1] * a[1, 0])
    best, best_val = span[:, 0], -1.0
    starts = [np.eye(d, dtype=complex)[k] for k in range(d)] + [np.ones(d, dtype=complex) / np.sqrt(d)]
    for c in starts:
        for _ in range(iters):
            nxt = np.conj(q @ c)
            nrm = np.linalg.norm(nxt)
            if nrm < 1e-15:
                break
            c = nxt / nrm
        val = abs(c @ q @ c)
        if val > best_val + 1e-12:
            best, best_val = span @ c, val
    return best / np.linalg.norm(best)


@dataclass(frozen=True)
class Witness:
    vector: np.ndarray
    phase: float
    schmidt: tuple
    forced: bool

    def to_dict(self) -> dict:
        return {"vector": _mj(np.atleast_2d(self.vector))[0], "phase": self.phase,
                "schmidt": list(self.schmidt), "forced": self.forced}


def _eigenspaces(u: np.ndarray) -> list:
    s = spectral(u)
    groups: list = []
    for k, ph in enumerate(s.phases):
        for g in groups:
            gap = abs(ph - g[0])
            if min(gap, 2 - gap) <= DEGENERACY_GAP:
                g[1].append(k)
                break
        else:
            groups.append([float(ph), [k]])
    return [(ph, s.basis[:, ks]) for ph, ks in groups]


def entangled_witness(u) -> Witness | None:
    """An entangled eigenvector of U.

    One-dimensional eigenspaces are tried first (their eigenvector is
    forced); inside a degenerate eigenspace the most entangled vector is
    reported with forced=False. Larger eigenphases are preferred on ties.
    """
    spaces = sorted(_eigenspaces(np.asarray(u)), key=lambda t: (t[1].shape[1] != 1, -t[0]))
    best = None
    for ph, span in spaces:
        v = _canonical_phase(max_concurrence_vector(span))
        sc = schmidt_coefficients(v)
        if sc[1] <= SCHMIDT_TOL:
            continue
        forced = span.shape[1] == 1
        cand = Witness(v, ph, tuple(float(x) for x in sc), forced)
        if best is None or (forced and not best.forced):
            best = cand
        elif forced == best.forced and sc[1] > best.schmidt[1] + 1e-9:
            best = cand
    return best


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ControlReport:
    cls: str
    qubit: int | None
    bases: tuple
    witness: Witness | None = None
    product_basis: np.ndarray | None = None
    degenerate: bool = False

    @property
    def commuting(self) -> tuple:
        return tuple(b.commuting for b in self.bases)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"class": self.cls, "bases": [b.to_dict() for b in self.bases],
                               "commuting": list(self.commuting), "degenerate_spectrum": self.degenerate}
        if self.qubit is not None:
            out["qubit"] = self.qubit
        if self.product_basis is not None:
            out["product_basis"] = _mj(self.product_basis)
        if self.cls == NONE:
            out["witness"] = self.witness.to_dict() if self.witness else None
        return out


def classify(u) -> ControlReport:
    """BothControlled, OneControlled (with the controlling qubit) or Uncontrolled."""
    u = _check_unitary(u, 4)
    found = {q: partial_eigenbasis(u, q) for q in (0, 1)}
    bases = tuple(b for b in found.values() if b is not None)
    for b in bases:
        other_exists = found[1 - b.qubit] is not None
        if b.commuting != other_exists:
            raise ControlError(f"commutation test on qubit {b.qubit} disagrees with the other qubit's basis")
    gaps = [abs(a - b) for a, b in itertools.combinations(spectral(u).phases, 2)]
    degenerate = any(min(g, 2 - g) <= DEGENERACY_GAP for g in gaps)
    if len(bases) == 2:
        v = np.stack(found[0].vectors, axis=1)
        w = np.stack(found[1].vectors, axis=1)
        pb = np.kron(v, w)
        d = pb.conj().T @ u @ pb
        if max_norm(d - np.diag(np.diag(d))) > BLOCK_TOL:
            raise ControlError("product of partial eigenbases does not diagonalize the gate")
        return ControlReport(BOTH, None, bases, product_basis=pb, degenerate=degenerate)
    if len(bases) == 1:
        return ControlReport(ONE, bases[0].qubit, bases, degenerate=degenerate)
    return ControlReport(NONE, None, (), witness=entangled_witness(u), degenerate=degenerate)


# ---------------------------------------------------------------------------
# Semi-classical interpretations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Branch:
    """One eigenvector of a controlling Box: if |u_j⟩ do (rest)^{λ_j}."""
    vector: np.ndarray
    eigenvalue: float
    action: np.ndarray


@dataclass(frozen=True)
class Interpretation:
    control_wires: tuple
    condition: str
    target_wires: tuple
    action: np.ndarray | None
    phase_exponent: float
    branches: tuple = ()
    n_wires: int = 0
    _symbol_projector: np.ndarray | None = field(default=None, repr=False, compare=False)

    def label(self) -> str:
        ws = ",".join(map(str, self.control_wires))
        if not self.target_wires:
            return f"if |{self.condition}>_{{{ws}}} do e^(iπ·{self.phase_exponent:g})·I"
        ts = ",".join(map(str, self.target_wires))
        return f"if |{self.condition}>_{{{ws}}} do U_{{{ts}}}"

    def reconstruct(self) -> np.ndarray:
        """Block form Σ over control branches of P ⊗ action + (I−P) ⊗ I on the gate's wires."""
        n = len(self.control_wires) + len(self.target_wires)
        order = list(self.control_wires) + list(self.target_wires)
        dim_t = 2 ** len(self.target_wires)
        p_sym = self._symbol_projector
        if not self.branches:
            ops = [(p_sym, self.action)]
        else:
            ops = [(np.kron(p_sym, np.outer(b.vector, b.vector.conj())), b.action) for b in self.branches]
        full = np.eye(2 ** n, dtype=complex)
        for p, act in ops:
            act = act if act.shape[0] == dim_t else act * np.eye(dim_t)
            full = full + np.kron(p, act - np.eye(dim_t))
        # reorder factors from (controls, targets) to ascending wire order
        sorted_w = sorted(order)
        return permute_qubits(full, [order.index(w) for w in sorted_w])

    def to_dict(self) -> dict:
        out = {"control_wires": list(self.control_wires), "condition": self.condition,
               "target_wires": list(self.target_wires), "phase_exponent": self.phase_exponent,
               "label": self.label()}
        if self.action is not None:
            out["action"] = _mj(np.atleast_2d(self.action))
        if self.branches:
            out["branches"] = [{"vector": _mj(np.atleast_2d(b.vector))[0], "eigenvalue": b.eigenvalue,
                                "action": _mj(np.atleast_2d(b.action))} for b in self.branches]
        return out


def _tensor(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def interpretations(g: Gate) -> list:
    """One reading per nonempty subset of occupants taken as controls."""
    occ = list(g.occupants)
    boxes = [k for k, (_, a) in enumerate(occ) if not a.is_symbol]
    if len(boxes) > 1:
        raise ControlError("interpretations support at most one non-symbol occupant")
    alpha = g.total_power
    hs = [atom_hamiltonian(a) for _, a in occ]
    out = []
    for r in range(1, len(occ) + 1):
        for subset in itertools.combinations(range(len(occ)), r):
            rest = [k for k in range(len(occ)) if k not in subset]
            sym_ctrl = [k for k in subset if occ[k][1].is_symbol]
            ctrl_wires = tuple(w for k in sym_ctrl for w in occ[k][0])
            tgt_wires = tuple(w for k in rest for w in occ[k][0])
            p_sym = _tensor([hs[k] for k in sym_ctrl])
            h_rest = _tensor([hs[k] for k in rest])
            cond = "".join(STATE_LABEL[occ[k][1].kind] for k in sym_ctrl)
            if boxes and boxes[0] in subset:
                bk = boxes[0]
                w_vals, w_vecs = np.linalg.eigh(hs[bk])
                branches = tuple(Branch(w_vecs[:, j], float(w_vals[j]),
                                        exp_hermitian(h_rest, alpha * w_vals[j]) if rest
                                        else np.array([[np.exp(1j * np.pi * alpha * w_vals[j])]]))
                                 for j in range(len(w_vals)) if abs(w_vals[j]) > 1e-12)
                ctrl_wires = ctrl_wires + tuple(occ[bk][0])
                cond = cond + "u_j"
                out.append(Interpretation(ctrl_wires, cond, tgt_wires, None, alpha, branches,
                                          _symbol_projector=p_sym))
            else:
                act = exp_hermitian(h_rest, alpha) if rest else np.array([[np.exp(1j * np.pi * alpha)]])
                out.append(Interpretation(ctrl_wires, cond, tgt_wires, act, alpha, _symbol_projector=p_sym))
    return out


def interpretation_deviation(g: Gate, it: Interpretation) -> float:
    wires, op = gate_local(g)
    # gate_local lists wires in occupant order; bring them to ascending order
    ordered = permute_qubits(op, [list(wires).index(w) for w in sorted(wires)])
    return max_norm(ordered - it.reconstruct())


# ---------------------------------------------------------------------------
# Diagonalization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagonalization:
    w: np.ndarray
    phases: np.ndarray
    v: Circuit
    lam: Circuit
    vdg: Circuit

    def composite(self) -> Circuit:
        """Time order: V† first, then the conditionals, then V."""
        return self.vdg + self.lam + self.v

    def to_dict(self) -> dict:
        return {"W": _mj(self.w), "phases": [float(p) for p in self.phases],
                "V": to_dict(self.v), "Lambda": to_dict(self.lam), "Vdg": to_dict(self.vdg)}


def _conditional(k: int, n: int, power: float) -> Gate:
    bits = [(k >> (n - 1 - j)) & 1 for j in range(n)]
    occ = []
    for j, bit in enumerate(bits):
        a = Atom("dot" if bit else "odot", power=power if j == 0 else 1.0)
        occ.append(((j,), a))
    return Gate(tuple(occ))


def diagonalize(u) -> Diagonalization:
    """U = W·diag(e^{iπλ_k})·W†, with W as a Box and the λ_k as all-dot conditionals."""
    u = _check_unitary(u)
    dim = u.shape[0]
    n = dim.bit_length() - 1
    if dim != 2 ** n or not 1 <= n <= 3:
        raise ControlError(f"diagonalize supports 1 to 3 wires, got dimension {dim}")
    if max_norm(u - np.diag(np.diag(u))) < 1e-12:
        w = np.eye(dim, dtype=complex)
        phases = np.mod(np.angle(np.diag(u)) / np.pi, 2.0)
        phases[(phases > 2.0 - 1e-12) | (phases < 1e-12)] = 0.0
    else:
        s = spectral(u)
        w, phases = s.basis, s.phases
    wires = tuple(range(n))
    trivial = max_norm(w - np.eye(dim)) < 1e-12
    v = Circuit(n, () if trivial else (Gate(((wires, box("W", w)),)),))
    vdg = Circuit(n, () if trivial else (Gate(((wires, box("W†", w.conj().T)),)),))
    lam = Circuit(n, tuple(_conditional(k, n, float(phases[k])) for k in range(dim) if phases[k] != 0.0))
    return Diagonalization(w, phases, v, lam, vdg)


def is_diagonal_form(c: Circuit) -> bool:
    """True when no gate carries an X-type symbol or a non-symbol occupant."""
    return all(isinstance(e, Gate) and all(a.kind in ("dot", "odot") for _, a in e.occupants)
               for e in c.elements)


__all__ = [
    "ControlError", "ControlReport", "Diagonalization", "Interpretation", "PartialEigenbasis", "Witness",
    "classify", "diagonalize", "entangled_witness", "interpretations", "interpretation_deviation",
    "is_diagonal_form", "local_commutant", "max_concurrence_vector", "partial_eigenbasis",
    "schmidt_coefficients",
]
