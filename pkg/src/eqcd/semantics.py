"""
Matrix semantics of diagrams under the exponential map U = exp(iπH).

Contains:
    - spectral(), principal_hamiltonian(), exp_hermitian()
    - atom_hamiltonian(), gate_local(), gate_unitary(), circuit_unitary()
    - circuit_channel(), contextual_isometry(), choi_of_unitary()
    - equivalent(): exact / global_phase / channel / context comparison

Every exponential goes through a Hermitian eigendecomposition, so the [0,2)
eigenphase convention is explicit. Norms are entrywise max norms.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy import linalg as sla

from .ir import (H_MATRIX, Atom, Circuit, Context, Discard, Gate, Measurement, permute_qubits)

MAX_WIRES = 10
SNAP_TOL = 1e-12
UNITARY_INPUT_TOL = 1e-8

_PROJ = {
    "dot": np.array([[0, 0], [0, 1]], dtype=complex),
    "odot": np.array([[1, 0], [0, 0]], dtype=complex),
    "oplus": 0.5 * np.array([[1, -1], [-1, 1]], dtype=complex),
    "ominus": 0.5 * np.array([[1, 1], [1, 1]], dtype=complex),
}


class SemanticsError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    basis: np.ndarray
    phases: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.basis @ np.diag(np.exp(1j * np.pi * self.phases)) @ self.basis.conj().T


@dataclass(frozen=True)
class Verdict:
    verdict: bool
    deviation: float

    def __bool__(self) -> bool:
        return self.verdict

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "deviation": self.deviation}


def max_norm(a: np.ndarray) -> float:
    a = np.asarray(a)
    return float(np.abs(a).max()) if a.size else 0.0


def unitarity_residual(u: np.ndarray) -> float:
    u = np.asarray(u)
    return max_norm(u.conj().T @ u - np.eye(u.shape[0]))


def _check_unitary(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise SemanticsError(f"expected a square matrix, got shape {u.shape}")
    res = unitarity_residual(u)
    if res > UNITARY_INPUT_TOL:
        raise SemanticsError(f"matrix is not unitary (residual {res:.3g})")
    return u


def spectral(u: np.ndarray) -> SpectralDecomposition:
    """Eigenphases in [0,2) (ascending) with an orthonormal eigenvector basis.

    The complex Schur form of a normal matrix is diagonal, so its unitary
    factor is an orthonormal eigenbasis even inside degenerate clusters.
    """
    u = _check_unitary(u)
    t, z = sla.schur(u, output="complex")
    phases = np.mod(np.angle(np.diag(t)) / np.pi, 2.0)
    phases[(phases > 2.0 - SNAP_TOL) | (phases < SNAP_TOL)] = 0.0
    order = np.argsort(phases, kind="stable")
    return SpectralDecomposition(z[:, order], phases[order])


def principal_hamiltonian(u: np.ndarray) -> np.ndarray:
    """The Hermitian H with spectrum in [0,2) and exp(iπH) = U."""
    s = spectral(u)
    h = s.basis @ np.diag(s.phases) @ s.basis.conj().T
    return 0.5 * (h + h.conj().T)


def exp_hermitian(h: np.ndarray, t: float = 1.0) -> np.ndarray:
    """exp(iπ t H) through the eigendecomposition of Hermitian H."""
    h = np.asarray(h, dtype=complex)
    if h.shape == (1, 1):
        return np.exp(1j * np.pi * t * h.real)
    w, v = np.linalg.eigh(0.5 * (h + h.conj().T))
    return (v * np.exp(1j * np.pi * t * w)) @ v.conj().T


@lru_cache(maxsize=4096)
def _box_hamiltonian(key: bytes, dim: int) -> np.ndarray:
    m = np.frombuffer(key, dtype=complex).reshape(dim, dim)
    h = principal_hamiltonian(m)
    h.setflags(write=False)
    return h


_H_HAMILTONIAN = principal_hamiltonian(H_MATRIX)


def atom_hamiltonian(a: Atom) -> np.ndarray:
    """Occupant Hamiltonian (without the atom's own number)."""
    if a.kind in _PROJ:
        return _PROJ[a.kind]
    if a.kind == "h":
        return _H_HAMILTONIAN
    m = np.ascontiguousarray(a.matrix, dtype=complex)
    return _box_hamiltonian(m.tobytes(), m.shape[0])


def occupant_hamiltonian(occupants: Iterable) -> tuple:
    """(wires, tensor product of occupant Hamiltonians in occupant order)."""
    wires: list[int] = []
    h = np.ones((1, 1), dtype=complex)
    for ws, a in occupants:
        wires.extend(ws)
        h = np.kron(h, atom_hamiltonian(a))
    return tuple(wires), h


def gate_local(g: Gate) -> tuple:
    """(wires, matrix) of the gate restricted to its occupied wires."""
    wires, h = occupant_hamiltonian(g.occupants)
    return wires, exp_hermitian(h, g.total_power)


def embed(op: np.ndarray, wires: Iterable[int], n: int) -> np.ndarray:
    """Full 2^n operator acting as `op` on `wires` (op's factor order) and I elsewhere."""
    wires = list(wires)
    if not wires:
        return complex(np.asarray(op).reshape(-1)[0]) * np.eye(2 ** n, dtype=complex)
    rest = [w for w in range(n) if w not in wires]
    full = np.kron(op, np.eye(2 ** len(rest)))
    order = wires + rest
    return permute_qubits(full, [order.index(j) for j in range(n)])


def apply_op(a: np.ndarray, op: np.ndarray, wires: Iterable[int], n: int) -> np.ndarray:
    """Left-multiply the (2^n, m) array `a` by `op` embedded on `wires`."""
    wires = list(wires)
    m = a.shape[1]
    if not wires:
        return complex(np.asarray(op).reshape(-1)[0]) * a
    k = len(wires)
    t = a.reshape((2,) * n + (m,))
    o = np.asarray(op).reshape((2,) * (2 * k))
    t = np.tensordot(o, t, axes=(list(range(k, 2 * k)), wires))
    # tensordot puts the op's output axes first; move them back into place
    rest = [w for w in range(n) if w not in wires]
    src = wires + rest + [n]
    t = np.moveaxis(t, list(range(n + 1)), src)
    return t.reshape(2 ** n, m)


def _check_size(n: int) -> None:
    if n > MAX_WIRES:
        raise SemanticsError(f"dense semantics capped at {MAX_WIRES} wires, got {n}")


def gate_unitary(g: Gate, n_wires: int) -> np.ndarray:
    for w in g.wires:
        if not 0 <= w < n_wires:
            raise SemanticsError(f"gate occupies wire {w} outside [0,{n_wires})")
    _check_size(n_wires)
    wires, u = gate_local(g)
    return embed(u, wires, n_wires)


def circuit_unitary(c: Circuit) -> np.ndarray:
    """Product of gate unitaries; the leftmost element acts first."""
    _check_size(c.n_wires)
    u = np.eye(2 ** c.n_wires, dtype=complex)
    for i, e in enumerate(c.elements):
        if not isinstance(e, Gate):
            raise SemanticsError(f"element {i} is a measurement/discard; use circuit_channel")
        if e.cc:
            raise SemanticsError(f"element {i} is classically controlled; use circuit_channel")
        wires, g = gate_local(e)
        u = apply_op(u, g, wires, c.n_wires)
    return u


# ---------------------------------------------------------------------------
# Channels and contexts
# ---------------------------------------------------------------------------

def _initial_isometry(n: int, ctx: Context | None) -> tuple:
    ctx = ctx or Context()
    for w in ctx.preparations:
        if not 0 <= w < n:
            raise SemanticsError(f"context prepares wire {w} outside [0,{n})")
    free = ctx.free_wires(n)
    prepared = list(ctx.preparations)
    state = np.ones((1, 1), dtype=complex)
    for w in prepared:
        state = np.kron(state, ctx.preparations[w].reshape(2, 1))
    iso = np.kron(state, np.eye(2 ** len(free)))
    order = prepared + free
    perm = [order.index(j) for j in range(n)]
    t = iso.reshape((2,) * n + (2 ** len(free),)).transpose(perm + [n])
    return t.reshape(2 ** n, 2 ** len(free)), free


def contextual_isometry(c: Circuit, ctx: Context) -> np.ndarray:
    """U · (prepared states ⊗ identity on free wires)."""
    if c.has_measurements or c.has_classical_controls:
        raise SemanticsError("contextual_isometry needs a measurement-free circuit")
    _check_size(c.n_wires)
    a, _ = _initial_isometry(c.n_wires, ctx)
    for e in c.elements:
        wires, g = gate_local(e)
        a = apply_op(a, g, wires, c.n_wires)
    return a


def _closed_wires(c: Circuit) -> set:
    return {e.wire for e in c.elements if isinstance(e, (Measurement, Discard))}


def default_kept(c: Circuit) -> list:
    closed = _closed_wires(c)
    return [w for w in range(c.n_wires) if w not in closed]


def circuit_channel(c: Circuit, kept_wires: Iterable[int] | None = None,
                    ctx: Context | None = None) -> np.ndarray:
    """Choi matrix (input ⊗ output ordering) of the channel free wires → kept wires.

    Measurements in a labelled basis are first rotated (rule mb), outcomes are
    enumerated as projective branches, classically controlled gates fire on
    bits equal to 1, and everything outside `kept_wires` is traced out.
    """
    n = c.n_wires
    _check_size(n)
    kept = sorted(default_kept(c) if kept_wires is None else set(kept_wires))
    closed = _closed_wires(c)
    for w in kept:
        if w in closed:
            raise SemanticsError(f"kept wire {w} is measured or discarded")
        if not 0 <= w < n:
            raise SemanticsError(f"kept wire {w} outside [0,{n})")
    a0, free = _initial_isometry(n, ctx)
    branches = [(a0, {})]
    proj = [np.array([[1, 0], [0, 0]], dtype=complex), np.array([[0, 0], [0, 1]], dtype=complex)]
    for i, e in enumerate(c.elements):
        if isinstance(e, Gate):
            wires, g = gate_local(e)
            new = []
            for a, bits in branches:
                missing = [b for b in e.cc if b not in bits]
                if missing:
                    raise SemanticsError(f"element {i} reads bit(s) {missing} before they are measured")
                fire = all(bits[b] == 1 for b in e.cc)
                new.append((apply_op(a, g, wires, n) if fire else a, bits))
            branches = new
        elif isinstance(e, Measurement):
            new = []
            for a, bits in branches:
                if e.basis is not None:
                    a = apply_op(a, e.basis.matrix.conj().T, [e.wire], n)
                for k in (0, 1):
                    ak = apply_op(a, proj[k], [e.wire], n)
                    if max_norm(ak) > 1e-15:
                        new.append((ak, {**bits, e.bit: k}))
            branches = new
    d_in, d_out = 2 ** len(free), 2 ** len(kept)
    rest = [w for w in range(n) if w not in kept]
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for a, _ in branches:
        t = a.reshape((2,) * n + (d_in,)).transpose(kept + rest + [n]).reshape(d_out, -1, d_in)
        choi += np.einsum("ari,brj->iajb", t, t.conj()).reshape(d_in * d_out, d_in * d_out)
    return choi


def choi_of_unitary(u: np.ndarray) -> np.ndarray:
    """Choi matrix Σ|i⟩⟨j| ⊗ U|i⟩⟨j|U† for a (possibly rectangular) isometry."""
    u = np.asarray(u, dtype=complex)
    d_out, d_in = u.shape
    vec = np.einsum("ai->ia", u).reshape(d_in * d_out)
    return np.outer(vec, vec.conj())


def identity_choi(n_wires: int) -> np.ndarray:
    return choi_of_unitary(np.eye(2 ** n_wires))


# ---------------------------------------------------------------------------
# Equivalence oracle
# ---------------------------------------------------------------------------

MODES = ("exact", "global_phase", "channel", "context")


def phase_aligned_deviation(a: np.ndarray, b: np.ndarray) -> float:
    """min over the phase fixed by the largest entry of B of ‖A − e^{iθ}B‖_max."""
    k = int(np.argmax(np.abs(b)))
    bk, ak = b.reshape(-1)[k], a.reshape(-1)[k]
    if abs(bk) < 1e-15 or abs(ak) < 1e-15:
        return max_norm(a - b)
    phase = (ak / bk) / abs(ak / bk)
    return max_norm(a - phase * b)


def equivalent(a, b, mode: str = "exact", tol: float = 1e-9, ctx: Context | None = None,
               kept: Iterable[int] | None = None) -> Verdict:
    """Compare two circuits or matrices; verdict = deviation <= tol."""
    if mode == "phase":
        mode = "global_phase"
    if mode not in MODES:
        raise SemanticsError(f"unknown mode {mode!r}")
    if mode == "context" and ctx is None:
        raise SemanticsError("context mode needs a Context")
    if mode == "context" and any(isinstance(x, Circuit) and (x.has_measurements or x.has_classical_controls) for x in (a, b)):
        mode = "channel"
    if mode == "channel":
        ma = circuit_channel(a, kept, ctx) if isinstance(a, Circuit) else np.asarray(a, dtype=complex)
        mb = circuit_channel(b, kept, ctx) if isinstance(b, Circuit) else np.asarray(b, dtype=complex)
    elif mode == "context":
        ma = contextual_isometry(a, ctx) if isinstance(a, Circuit) else np.asarray(a, dtype=complex)
        mb = contextual_isometry(b, ctx) if isinstance(b, Circuit) else np.asarray(b, dtype=complex)
    else:
        ma = circuit_unitary(a) if isinstance(a, Circuit) else np.asarray(a, dtype=complex)
        mb = circuit_unitary(b) if isinstance(b, Circuit) else np.asarray(b, dtype=complex)
    if ma.shape != mb.shape:
        raise SemanticsError(f"dimension mismatch: {ma.shape} vs {mb.shape}")
    dev = phase_aligned_deviation(ma, mb) if mode == "global_phase" else max_norm(ma - mb)
    return Verdict(dev <= tol, dev)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary from the QR factorization of a complex Gaussian matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))
