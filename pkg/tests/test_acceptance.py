"""Acceptance criteria 1 to 10, one test each; every test prints one PASS/FAIL line."""
import itertools

import numpy as np
import pytest

from eqcd import catalog, control, ir, prover
from eqcd import rules as R
from eqcd import semantics as sem
from eqcd.ir import Circuit, Context, gate

from oracles import (BELL, CNOT, CZ, H, I2, KET, SWAP, X, Z, all_bitstrings, grover_probability,
                     negation_permutation)

FSWAP = CZ @ SWAP
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]])
QFT2 = np.array([[1, 1, 1, 1], [1, 1j, -1, -1j], [1, -1, 1, -1], [1, -1j, -1, 1j]]) / 2


@pytest.fixture
def report(capsys):
    def _report(n, checks):
        failed = [name for name, ok in checks if not ok]
        line = f"criterion {n}: {'PASS' if not failed else 'FAIL'} ({len(checks) - len(failed)}/{len(checks)} checks)"
        if failed:
            line += " failing: " + "; ".join(failed[:5])
        with capsys.disabled():
            print("\n" + line)
        assert not failed, line
    return _report


def dist(a, b):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max())


def probs_of(c, ctx, wires):
    psi = sem.contextual_isometry(c, ctx)[:, 0]
    n = c.n_wires
    out = {}
    for k, amp in enumerate(psi):
        key = "".join(str((k >> (n - 1 - w)) & 1) for w in wires)
        out[key] = out.get(key, 0.0) + abs(amp) ** 2
    return out


# 1 ---------------------------------------------------------------------------

def test_criterion_1_ruleset_soundness(report):
    rep = prover.soundness_suite(seed=42, samples=100, tol=1e-9)
    rule_items = [i for i in rep.items if i["item"].startswith("rule:")]
    checks = [(i["item"], i["passed"] and i["deviation"] < 1e-9) for i in rule_items]
    checks.append(("15 base rules", len(R.base_ruleset()) == 15))
    checks.append(("6 derived rules", [r.name for r in R.derived_rules()] == ["i_prime", "p", "p3", "fivecx", "t_prime", "z"]))
    checks.append(("every closure variant checked", len(rule_items) == len(prover.all_rule_variants())))
    report(1, checks)


# 2 ---------------------------------------------------------------------------

def test_criterion_2_symbol_semantics(report):
    def u(occ):
        return sem.gate_unitary(gate(occ), max(occ) + 1)

    checks = [
        ("• = Z", dist(u({0: "dot"}), Z) < 1e-12),
        ("∘ = -Z", dist(u({0: "odot"}), -Z) < 1e-12),
        ("⊕ = X", dist(u({0: "oplus"}), X) < 1e-12),
        ("⊖ = -X", dist(u({0: "ominus"}), -X) < 1e-12),
        ("CNOT", dist(u({0: "dot", 1: "oplus"}), CNOT) < 1e-12),
        ("⊕⊕ joined", dist(u({0: "oplus", 1: "oplus"}),
                           0.5 * np.array([[1, 1, 1, -1], [1, 1, -1, 1], [1, -1, 1, 1], [-1, 1, 1, 1]])) < 1e-12),
        ("⊖⊕ joined", dist(u({0: "ominus", 1: "oplus"}),
                           0.5 * np.array([[1, 1, -1, 1], [1, 1, 1, -1], [-1, 1, 1, 1], [1, -1, 1, 1]])) < 1e-12),
    ]
    report(2, checks)


# 3 ---------------------------------------------------------------------------

def test_criterion_3_hadamard_sugar(report):
    ds = prover.hadamard_decompositions()
    checks = [(f"decomposition {k + 1}", dist(sem.circuit_unitary(c), H) < 1e-9) for k, c in enumerate(ds)]
    checks.append(("three decompositions", len(ds) == 3))
    report(3, checks)


# 4 ---------------------------------------------------------------------------

def test_criterion_4_strict_proofs(report):
    checks = []
    for name in ("g_from_def", "i_prime", "p", "fivecx", "t_prime"):
        s = prover.bundled_script(name)
        rep = prover.verify_script(s, strict=True)
        no_oracle = all(st.just not in ("oracle", "context") for st in s.steps)
        checks.append((name, rep.ok and no_oracle))
    report(4, checks)


# 5 ---------------------------------------------------------------------------

def test_criterion_5_qft_and_dodo_endpoints(report):
    checks = [
        ("QFT2² = upside-down CNOT", sem.equivalent(catalog.qft_squared(2), catalog.upside_down_cnot(), "exact", 1e-9).verdict),
        ("QFT3² = reduced", sem.equivalent(catalog.qft_squared(3), catalog.qft3_squared_reduced(), "exact", 1e-9).verdict),
    ]
    for n in (2, 3, 4):
        checks.append((f"QFT{n}² negates", dist(sem.circuit_unitary(catalog.qft_squared(n)), negation_permutation(n)) < 1e-9))
    ch = sem.circuit_channel(catalog.dodo_12_1_1(), catalog.kept_for("dodo_12_1_1"), catalog.context_for("dodo_12_1_1"))
    checks.append(("Dodo channel = identity", dist(ch, sem.identity_choi(2)) < 1e-9))
    report(5, checks)


# 6 ---------------------------------------------------------------------------

def test_criterion_6_diagonalizations(report):
    checks = []
    for name, u in (("CNOT", CNOT), ("SWAP", SWAP), ("fSWAP", FSWAP), ("iSWAP", ISWAP), ("QFT2", QFT2)):
        d = control.diagonalize(u)
        checks.append((f"{name} reconstructs", dist(sem.circuit_unitary(d.composite()), u) < 1e-9))
        checks.append((f"{name} Λ diagonal form", control.is_diagonal_form(d.lam)))
    checks.append(("SWAP phases", np.allclose(sorted(control.diagonalize(SWAP).phases), [0, 0, 0, 1], atol=1e-9)))
    checks.append(("fSWAP phases", np.allclose(sorted(control.diagonalize(FSWAP).phases), [0, 0, 1, 1], atol=1e-9)))
    d = control.diagonalize(ISWAP)
    for name, ph in (("phi+", 0.0), ("phi-", 0.0), ("psi+", 0.5), ("psi-", 1.5)):
        cols = [k for k, p in enumerate(d.phases) if abs(p - ph) < 1e-9]
        proj = d.w[:, cols] @ d.w[:, cols].conj().T
        checks.append((f"iSWAP {name} phase {ph}", abs(np.linalg.norm(proj @ BELL[name]) - 1) < 1e-9))
    report(6, checks)


# 7 ---------------------------------------------------------------------------

def test_criterion_7_communication(report):
    ch = sem.circuit_channel(catalog.teleportation(), [2], catalog.context_for("teleportation"))
    checks = [("teleportation", dist(ch, sem.identity_choi(1)) < 1e-9)]
    for a, b in itertools.product((0, 1), repeat=2):
        ch = sem.circuit_channel(catalog.superdense(a, b), [2, 3], catalog.context_for("superdense", a=a, b=b))
        t = np.zeros(4)
        t[2 * a + b] = 1
        checks.append((f"superdense {a}{b}", abs(np.real(t @ ch @ t) - 1) < 1e-9))
    ch = sem.circuit_channel(catalog.entanglement_swap(), [0, 3], catalog.context_for("entanglement_swap"))
    checks.append(("entanglement swap", np.real(BELL["phi+"] @ ch @ BELL["phi+"]) > 1 - 1e-9))
    report(7, checks)


# 8 ---------------------------------------------------------------------------

def test_criterion_8_algorithms(report):
    checks = []
    for b, c in itertools.product((0, 1), repeat=2):
        p = probs_of(catalog.deutsch(b, c), catalog.context_for("deutsch"), [0])
        checks.append((f"Deutsch b={b} c={c}", abs(p[str(b)] - 1) < 1e-9))
    for n in range(1, 6):
        for bits in all_bitstrings(n):
            for c in (0, 1):
                p = probs_of(catalog.deutsch_jozsa(bits, c), catalog.context_for("deutsch_jozsa", b=bits), list(range(n)))
                checks.append((f"DJ {bits} c={c}", abs(p[bits] - 1) < 1e-9))
            p = probs_of(catalog.bernstein_vazirani(bits), catalog.context_for("bernstein_vazirani", s=bits), list(range(n)))
            checks.append((f"BV {bits}", abs(p[bits] - 1) < 1e-9))
    v = sem.contextual_isometry(catalog.phase_estimation(3, "5/8"), catalog.context_for("phase_estimation"))
    checks.append(("phase estimation |101>", abs(abs(v[0b101, 0]) - 1) < 1e-9))
    p = probs_of(catalog.grover(3, "101", 2), catalog.context_for("grover", n=3), [0, 1, 2])["101"]
    checks.append(("Grover >= 0.9", p >= 0.9))
    checks.append(("Grover matches statevector oracle", abs(p - grover_probability(3, 5, 2)) < 1e-9))
    report(8, checks)


# 9 ---------------------------------------------------------------------------

def _haar(d, rng):
    return sem.random_unitary(d, rng)


def test_criterion_9_control_analysis(report):
    checks = []
    r = control.classify(CNOT)
    b0, b1 = sorted(r.bases, key=lambda b: b.qubit)
    kets_ok = (all(abs(abs(np.vdot(v, KET[k])) - 1) < 1e-9 for v, k in zip(b0.vectors, "01"))
               and all(abs(abs(np.vdot(v, KET[k])) - 1) < 1e-9 for v, k in zip(b1.vectors, "+-")))
    checks.append(("CNOT BothControlled", r.cls == control.BOTH and kets_ok))

    bell = CNOT @ np.kron(H, I2)
    r = control.classify(bell)
    ok = r.cls == control.ONE and r.qubit == 1
    if ok:
        a, b = r.bases[0].conditionals
        ok = dist(a, H) < 1e-9 and dist(b, Z @ H) < 1e-9 and not r.bases[0].commuting
    checks.append(("Bell gate OneControlled on B with {H, HZ}", ok))

    for name, u in (("SWAP", SWAP), ("fSWAP", FSWAP), ("iSWAP", ISWAP)):
        r = control.classify(u)
        checks.append((f"{name} Uncontrolled with witness",
                       r.cls == control.NONE and r.witness is not None and r.witness.schmidt[1] > 1e-6))

    rng = np.random.default_rng(9)
    both = one = forced = True
    for k in range(200):
        v = np.kron(_haar(2, rng), _haar(2, rng))
        r = control.classify(v @ np.diag(np.exp(1j * rng.uniform(0, 2 * np.pi, 4))) @ v.conj().T)
        both &= r.cls == control.BOTH and all(r.commuting)
        q = k % 2
        a, u0, u1 = _haar(2, rng), _haar(2, rng), _haar(2, rng)
        g = sum(np.kron(np.outer(a[:, j], a[:, j].conj()), uj) if q == 0 else np.kron(uj, np.outer(a[:, j], a[:, j].conj()))
                for j, uj in enumerate((u0, u1)))
        r = control.classify(g)
        one &= r.cls == control.ONE and r.qubit == q and r.commuting == (False,)
        r = control.classify(_haar(4, rng))
        forced &= r.cls == control.NONE and r.witness is not None and r.witness.schmidt[1] >= 1e-6
    checks += [("200 product-eigenbasis gates BothControlled, commuting", both),
               ("200 one-sided gates OneControlled, non-commuting", one),
               ("200 random gates Uncontrolled with entangled witness", forced)]

    for name, g, count in (("Toffoli", gate({0: "dot", 1: "dot", 2: "oplus"}), 7), ("CNOT", gate({0: "dot", 1: "oplus"}), 3)):
        its = control.interpretations(g)
        checks.append((f"{name} {count} interpretations", len(its) == count))
        checks.append((f"{name} readings reconstruct",
                       all(control.interpretation_deviation(g, it) < 1e-9 for it in its)))
    report(9, checks)


# 10 --------------------------------------------------------------------------

def _random_dyadic_circuit(rng):
    n = int(rng.integers(1, 5))
    els = []
    for _ in range(int(rng.integers(0, 13))):
        k = int(rng.integers(1, n + 1))
        wires = rng.permutation(n)[:k]
        kinds = rng.choice(["dot", "odot", "oplus", "ominus", "h"], size=k)
        els.append(gate({int(w): str(s) for w, s in zip(wires, kinds)}, int(rng.integers(-8, 9)) / 4))
    return Circuit(n, tuple(els))


def test_criterion_10_property_suites(report):
    rng = np.random.default_rng(10)
    round_trip = {}
    for d in (2, 4, 8):
        worst = 0.0
        for _ in range(1000):
            u = sem.random_unitary(d, rng)
            worst = max(worst, dist(sem.exp_hermitian(sem.principal_hamiltonian(u)), u))
        round_trip[d] = worst
    checks = [(f"exp/log dim {d} ({w:.1e})", w < 1e-9) for d, w in round_trip.items()]

    preserved = idempotent = True
    for _ in range(500):
        c = _random_dyadic_circuit(rng)
        res = prover.simplify(c)
        preserved &= res.converged and sem.equivalent(c, res.circuit, "exact", 1e-9).verdict
        again = prover.simplify(res.circuit)
        idempotent &= again.trace == [] and again.circuit == res.circuit
    checks += [("simplify preserves semantics on 500 circuits", preserved),
               ("simplify idempotent on 500 circuits", idempotent)]

    for name in catalog.names():
        c = catalog.build(name)
        if c.has_measurements:
            ctx, kept = catalog.context_for(name), catalog.kept_for(name)
            a = sem.circuit_channel(c, kept, ctx)
            b = sem.circuit_channel(prover.defer_all_measurements(c), kept, ctx)
            checks.append((f"defer {name}", dist(a, b) < 1e-9))
        checks.append((f"serialize {name}", ir.parse(ir.serialize(c)) == c))
    report(10, checks)
