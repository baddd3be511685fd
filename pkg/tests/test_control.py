import math

import numpy as np
import pytest
import scipy.linalg as sla

from eqcd import catalog, control, ir
from eqcd import semantics as sem
from eqcd.ir import box, gate

from oracles import BELL, CNOT, CZ, H, I2, KET, SWAP, X, Z

FSWAP = CZ @ SWAP
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])
BELL_GATE = CNOT @ np.kron(H, I2)
TOFFOLI_GATE = gate({0: "dot", 1: "dot", 2: "oplus"})


def commutant_dim_oracle(u, qubit):
    """dim({X : [U,X]=0} ∩ {M⊗I}) by subspace intersection, independent of the SVD route."""
    full = sla.null_space(np.kron(np.eye(4), u) - np.kron(u.T, np.eye(4)))
    lifted = np.stack([(np.kron(e.reshape(2, 2), I2) if qubit == 0 else np.kron(I2, e.reshape(2, 2))).reshape(-1, order="F")
                       for e in np.eye(4)], axis=1)
    both = np.hstack([full, lifted])
    return full.shape[1] + 4 - np.linalg.matrix_rank(both, tol=1e-9)


def ket_eq(a, b, tol=1e-9):
    return abs(abs(np.vdot(a, b)) - 1) < tol


def mat_eq_up_to_phase(a, b, tol=1e-9):
    k = np.argmax(np.abs(b))
    return abs(b.flat[k]) > 0 and np.abs(a * (b.flat[k] / a.flat[k]) - b).max() < tol


def haar(d, rng):
    return sem.random_unitary(d, rng)


# --- local_commutant ------------------------------------------------------------

@pytest.mark.parametrize("u,qubit,dim", [(CNOT, 0, 2), (CNOT, 1, 2), (SWAP, 0, 1), (SWAP, 1, 1),
                                         (np.eye(4), 0, 4), (FSWAP, 0, 1), (BELL_GATE, 1, 2), (BELL_GATE, 0, 1)])
def test_local_commutant_dimension(u, qubit, dim):
    basis = control.local_commutant(u, qubit)
    assert len(basis) == dim == commutant_dim_oracle(u, qubit)


def test_local_commutant_elements_commute_and_are_orthonormal(rng):
    for u in (CNOT, BELL_GATE, haar(4, rng), np.kron(haar(2, rng), haar(2, rng))):
        for q in (0, 1):
            ms = control.local_commutant(u, q)
            for m in ms:
                lm = np.kron(m, I2) if q == 0 else np.kron(I2, m)
                assert np.abs(u @ lm - lm @ u).max() < 1e-9
            gram = np.array([[np.vdot(a, b) for b in ms] for a in ms])
            assert np.abs(gram - np.eye(len(ms))).max() < 1e-9
            # identity always lies in the span
            coeffs = np.array([np.vdot(m, I2) for m in ms])
            assert abs(np.linalg.norm(coeffs) - math.sqrt(2)) < 1e-9


def test_cnot_commutant_is_span_of_i_and_z():
    ms = control.local_commutant(CNOT, 0)
    span = np.stack([m.reshape(-1) for m in ms], axis=1)
    for target in (I2, Z):
        proj = span @ (span.conj().T @ target.reshape(-1))
        assert np.abs(proj - target.reshape(-1)).max() < 1e-9
    assert commutant_dim_oracle(CNOT, 0) == 2


def test_local_commutant_rejects_non_unitary():
    with pytest.raises(control.ControlError):
        control.local_commutant(np.ones((4, 4)), 0)


# --- partial_eigenbasis ---------------------------------------------------------

def test_cnot_qubit0_basis():
    pb = control.partial_eigenbasis(CNOT, 0)
    assert ket_eq(pb.vectors[0], KET["0"]) and ket_eq(pb.vectors[1], KET["1"])
    assert np.abs(pb.conditionals[0] - I2).max() < 1e-9
    assert np.abs(pb.conditionals[1] - X).max() < 1e-9
    assert pb.residual(CNOT) < 1e-9


def test_cnot_qubit1_basis():
    pb = control.partial_eigenbasis(CNOT, 1)
    assert ket_eq(pb.vectors[0], KET["+"]) and ket_eq(pb.vectors[1], KET["-"])
    assert np.abs(pb.conditionals[0] - I2).max() < 1e-9
    assert np.abs(pb.conditionals[1] - Z).max() < 1e-9


def test_swap_has_no_partial_eigenbasis():
    assert control.partial_eigenbasis(SWAP, 0) is None
    assert control.partial_eigenbasis(SWAP, 1) is None


def test_partial_eigenbasis_block_residual_random(rng):
    for _ in range(20):
        u = np.kron(haar(2, rng), haar(2, rng))
        for q in (0, 1):
            pb = control.partial_eigenbasis(u, q)
            assert pb is not None and pb.residual(u) < 1e-9


# --- classify -------------------------------------------------------------------

def test_cnot_both_controlled():
    rep = control.classify(CNOT)
    assert rep.cls == control.BOTH
    assert {b.qubit for b in rep.bases} == {0, 1}
    assert all(rep.commuting)
    d = rep.product_basis.conj().T @ CNOT @ rep.product_basis
    assert np.abs(d - np.diag(np.diag(d))).max() < 1e-9


def test_bell_gate_one_controlled_on_b():
    rep = control.classify(BELL_GATE)
    assert rep.cls == control.ONE and rep.qubit == 1
    (pb,) = rep.bases
    a, b = pb.conditionals
    # circuit order "H then Z" is the matrix Z·H
    assert mat_eq_up_to_phase(a, H) and mat_eq_up_to_phase(b, Z @ H)
    assert not pb.commuting
    assert np.abs(a @ b - b @ a).max() > 0.5


@pytest.mark.parametrize("name,u,forced", [("swap", SWAP, True), ("fswap", FSWAP, False), ("iswap", ISWAP, True)])
def test_uncontrolled_gates_have_psi_minus_witness(name, u, forced):
    rep = control.classify(u)
    assert rep.cls == control.NONE and rep.bases == ()
    w = rep.witness
    assert w is not None and w.forced is forced
    assert ket_eq(w.vector, BELL["psi-"])
    assert w.schmidt[1] > 1e-6
    assert np.abs(u @ w.vector - np.exp(1j * np.pi * w.phase) * w.vector).max() < 1e-9


def test_catalog_fswap_and_iswap_match_matrices():
    assert np.abs(sem.circuit_unitary(catalog.build("fswap")) - FSWAP).max() < 1e-12
    assert np.abs(sem.circuit_unitary(catalog.build("iswap")) - ISWAP).max() < 1e-12
    assert np.abs(sem.circuit_unitary(catalog.build("bell")) - BELL_GATE).max() < 1e-12


def test_report_json_shape():
    d = control.classify(SWAP).to_dict()
    assert d["class"] == "Uncontrolled" and d["witness"]["forced"] is True
    d = control.classify(CNOT).to_dict()
    assert d["class"] == "BothControlled" and len(d["product_basis"]) == 4


def _product_eigenbasis_gate(rng):
    v = np.kron(haar(2, rng), haar(2, rng))
    return v @ np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 4))) @ v.conj().T


def _one_sided_gate(rng, qubit):
    a = haar(2, rng)
    u0, u1 = haar(2, rng), haar(2, rng)
    out = np.zeros((4, 4), dtype=complex)
    for k, uk in enumerate((u0, u1)):
        p = np.outer(a[:, k], a[:, k].conj())
        out += np.kron(p, uk) if qubit == 0 else np.kron(uk, p)
    return out


def test_product_eigenbasis_gates_are_both_controlled():
    rng = np.random.default_rng(2001)
    for _ in range(200):
        rep = control.classify(_product_eigenbasis_gate(rng))
        assert rep.cls == control.BOTH
        assert all(rep.commuting)


def test_one_sided_gates_are_one_controlled():
    rng = np.random.default_rng(2002)
    for k in range(200):
        q = k % 2
        rep = control.classify(_one_sided_gate(rng, q))
        assert rep.cls == control.ONE and rep.qubit == q
        assert rep.commuting == (False,)


def test_one_sided_blocks_are_recovered():
    rng = np.random.default_rng(2003)
    for _ in range(50):
        u = _one_sided_gate(rng, 0)
        (pb,) = control.classify(u).bases
        assert pb.residual(u) < 1e-9


def test_random_gates_are_uncontrolled_with_forced_witness():
    rng = np.random.default_rng(2004)
    for _ in range(200):
        u = haar(4, rng)
        rep = control.classify(u)
        assert rep.cls == control.NONE and not rep.degenerate
        w = rep.witness
        assert w.forced and w.schmidt[1] >= 1e-6
        assert np.abs(u @ w.vector - np.exp(1j * np.pi * w.phase) * w.vector).max() < 1e-9


def test_identity_is_both_controlled_with_degenerate_spectrum():
    rep = control.classify(np.eye(4))
    assert rep.cls == control.BOTH and rep.degenerate


def test_max_concurrence_finds_bell_state_in_span():
    span = np.stack([np.kron(KET["1"], KET["1"]), BELL["psi-"]], axis=1)
    v = control.max_concurrence_vector(span)
    assert ket_eq(v, BELL["psi-"])
    assert control.schmidt_coefficients(BELL["phi+"])[1] == pytest.approx(1 / math.sqrt(2))


# --- interpretations --------------------------------------------------------

def test_cnot_three_readings():
    g = gate({0: "dot", 1: "oplus"})
    its = control.interpretations(g)
    assert len(its) == 3
    by = {it.condition: it for it in its}
    assert set(by) == {"1", "-", "1-"}
    assert np.abs(by["1"].action - X).max() < 1e-9 and by["1"].target_wires == (1,)
    assert np.abs(by["-"].action - Z).max() < 1e-9 and by["-"].target_wires == (0,)
    assert abs(by["1-"].action[0, 0] + 1) < 1e-9 and by["1-"].target_wires == ()
    for it in its:
        assert control.interpretation_deviation(g, it) < 1e-9


def test_toffoli_seven_readings():
    its = control.interpretations(TOFFOLI_GATE)
    assert len(its) == 7
    assert {it.condition for it in its} == {"1", "-", "11", "1-", "11-"}
    for it in its:
        assert control.interpretation_deviation(TOFFOLI_GATE, it) < 1e-9


def test_box_gate_seven_readings(rng):
    u = box("U", haar(2, rng))
    g = gate({0: "odot", 1: u, 2: "oplus"})
    its = control.interpretations(g)
    assert len(its) == 7
    with_box = [it for it in its if it.branches]
    assert len(with_box) == 4
    for it in its:
        assert control.interpretation_deviation(g, it) < 1e-9
    # if |0>_0 do U^α⊗… on the rest: the single-symbol reading with wire 0 as control
    (r0,) = [it for it in its if it.control_wires == (0,)]
    h_u = sem.atom_hamiltonian(u)
    h_x = np.outer(KET["-"], KET["-"])
    expect = sla.expm(1j * np.pi * np.kron(h_u, h_x))
    assert np.abs(r0.action - expect).max() < 1e-9


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_reading_count_is_two_to_the_m_minus_one(m, rng):
    kinds = ["dot", "odot", "oplus", "ominus"]
    g = gate({k: kinds[int(rng.integers(4))] for k in range(m)}, float(rng.uniform(-2, 2)))
    its = control.interpretations(g)
    assert len(its) == 2 ** m - 1
    for it in its:
        assert control.interpretation_deviation(g, it) < 1e-9


def test_two_boxes_unsupported(rng):
    g = gate({0: box("A", haar(2, rng)), 1: box("B", haar(2, rng))})
    with pytest.raises(control.ControlError):
        control.interpretations(g)


# --- diagonalize --------------------------------------------------------------

QFT2 = np.array([[1, 1, 1, 1], [1, 1j, -1, -1j], [1, -1, 1, -1], [1, -1j, -1, 1j]]) / 2


@pytest.mark.parametrize("u", [CNOT, SWAP, FSWAP, ISWAP, QFT2, CZ, H], ids=["cnot", "swap", "fswap", "iswap", "qft2", "cz", "h"])
def test_diagonalization_reconstructs(u):
    d = control.diagonalize(u)
    assert np.abs(sem.circuit_unitary(d.composite()) - u).max() < 1e-9
    assert control.is_diagonal_form(d.lam)


def test_qft2_catalog_matches_dft():
    assert np.abs(sem.circuit_unitary(catalog.qft(2)) - QFT2).max() < 1e-12


def test_diagonalization_random_three_qubit(rng):
    u = haar(8, rng)
    d = control.diagonalize(u)
    assert len(d.lam.elements) == 8
    assert np.abs(sem.circuit_unitary(d.composite()) - u).max() < 1e-9


def test_phase_multisets():
    assert np.allclose(sorted(control.diagonalize(SWAP).phases), [0, 0, 0, 1])
    assert np.allclose(sorted(control.diagonalize(FSWAP).phases), [0, 0, 1, 1])
    assert np.allclose(sorted(control.diagonalize(ISWAP).phases), [0, 0, 0.5, 1.5])


def test_swap_psi_minus_slot():
    d = control.diagonalize(SWAP)
    (k,) = [k for k, p in enumerate(d.phases) if abs(p - 1) < 1e-9]
    assert ket_eq(d.w[:, k], BELL["psi-"])
    assert len(d.lam.elements) == 1


def test_iswap_bell_phases():
    # Bell-basis eigenphases: Φ± unchanged, Ψ+ gains i, Ψ− gains −i
    for name, ph in (("phi+", 0.0), ("phi-", 0.0), ("psi+", 0.5), ("psi-", 1.5)):
        v = BELL[name]
        assert np.abs(ISWAP @ v - np.exp(1j * np.pi * ph) * v).max() < 1e-12


def test_cz_is_already_diagonal():
    d = control.diagonalize(CZ)
    assert d.v.elements == () and d.vdg.elements == ()
    assert d.lam.elements == (gate({0: "dot", 1: "dot"}),)


def test_phase_sits_on_top_atom():
    d = control.diagonalize(ISWAP)
    for g in d.lam.elements:
        top = g.atom_at(0)[1]
        assert top.power != 1.0 or all(a.power == 1.0 for a in g.atoms[1:])
        assert all(a.power == 1.0 for a in g.atoms[1:])


def test_is_diagonal_form_rejects_x_type():
    assert not control.is_diagonal_form(ir.circuit(1, gate({0: "oplus"})))
    assert control.is_diagonal_form(ir.circuit(2, gate({0: "dot", 1: "odot"}, 0.3)))


def test_diagonalize_errors():
    with pytest.raises(control.ControlError):
        control.diagonalize(np.eye(16))
    with pytest.raises(control.ControlError):
        control.diagonalize(np.ones((2, 2)))
