import json

import numpy as np
import pytest

from eqcd import catalog, derivations, ir, prover
from eqcd import rules as R
from eqcd import semantics as sem
from eqcd.ir import Circuit, Gate, Measurement, circuit, gate
from eqcd.prover import ProofScript, ProofStep

from oracles import H

STRICT = ["g_from_def", "i_prime", "p", "fivecx", "t_prime"]


# --- bundled scripts ----------------------------------------------------------

@pytest.mark.parametrize("name", prover.BUNDLED)
def test_bundled_script_verifies_strict(name):
    s = prover.bundled_script(name)
    rep = prover.verify_script(s, strict=True)
    assert rep.ok, [v for v in rep.steps if not v.ok]
    # independent endpoint check: strict acceptance implies semantic equality
    if s.context is None:
        assert sem.equivalent(s.initial, s.final, "exact", 1e-9)


@pytest.mark.parametrize("name", prover.BUNDLED)
def test_bundled_script_matches_fresh_derivation(name):
    stored = prover.bundled_script(name).to_dict()
    fresh = json.loads(derivations.BUILDERS[name]().dumps())
    assert stored == fresh


def test_error_propagation_copies_z_to_control():
    s = prover.bundled_script("error_propagation_Z")
    assert all(st.rule_name is not None or st.just == "structural" for st in s.steps)
    assert sem.equivalent(s.initial, s.final)


def test_qft2_squared_ends_at_upside_down_cnot():
    s = prover.bundled_script("qft2_squared")
    assert R.circuits_equal(s.initial, catalog.qft_squared(2))
    assert s.final.elements == (gate({0: "oplus", 1: "dot"}),)
    assert sem.equivalent(s.final, catalog.upside_down_cnot())


def test_unknown_bundled_name():
    with pytest.raises(prover.ProverError):
        prover.bundled_script("nope")


# --- verify_script ------------------------------------------------------------

def test_c_on_opposite_types_fails_with_no_match():
    c0 = circuit(1, gate({0: "dot"}), gate({0: "oplus"}))
    c1 = circuit(1, gate({0: "oplus"}), gate({0: "dot"}))
    s = ProofScript(c0, (ProofStep("rule:c", 0, c1),), c1)
    rep = prover.verify_script(s)
    assert not rep.ok
    assert not rep.steps[0].ok
    assert rep.steps[0].message.startswith("no match")


def test_wrong_stated_result_is_rejected():
    c0 = circuit(1, gate({0: "dot"}), gate({0: "dot"}))
    bogus = circuit(1, gate({0: "dot"}))
    rep = prover.verify_script(ProofScript(c0, (ProofStep("rule:i", 0, bogus),), bogus))
    assert not rep.steps[0].ok


def test_oracle_step_allowed_only_when_not_strict():
    c0 = circuit(1, gate({0: "h"}), gate({0: "h"}))
    s = prover.Derivation(c0).oracle(circuit(1)).script()
    assert prover.verify_script(s).ok
    strict = prover.verify_script(s, strict=True)
    assert not strict.ok
    assert "strict" in strict.steps[0].message


def test_false_oracle_step_fails():
    s = prover.Derivation(circuit(1, gate({0: "dot"}))).oracle(circuit(1)).script()
    rep = prover.verify_script(s)
    assert not rep.ok and rep.steps[0].deviation > 1


def test_context_step_uses_context():
    # CZ does nothing when wire 0 is prepared in |0>
    ctx = ir.Context({0: "0"})
    d = prover.Derivation(circuit(2, gate({0: "dot", 1: "dot"})), context=ctx, kept=[1])
    s = d.oracle(circuit(2), kind="context").script()
    assert prover.verify_script(s).ok
    no_ctx = ProofScript(s.initial, s.steps, s.final)
    assert not prover.verify_script(no_ctx).ok


def test_illegal_structural_step():
    c0 = circuit(2, gate({0: "dot", 1: "oplus"}), gate({1: "dot"}))
    c1 = circuit(2, gate({1: "dot"}), gate({0: "dot", 1: "oplus"}))
    rep = prover.verify_script(ProofScript(c0, (ProofStep("structural", 0, c1),), c1))
    assert not rep.ok


def test_final_must_equal_last_result():
    c0 = circuit(1, gate({0: "dot"}), gate({0: "dot"}))
    s = ProofScript(c0, (ProofStep("rule:i", 0, circuit(1)),), circuit(2))
    rep = prover.verify_script(s)
    assert not rep.final_matches and not rep.ok


def test_script_json_round_trip():
    s = prover.bundled_script("fivecx")
    back = prover.load_script(s.dumps())
    assert back.to_dict() == s.to_dict()


def test_load_script_errors_carry_paths():
    with pytest.raises(ir.ParseError) as exc:
        prover.load_script(json.dumps({"initial": ir.to_dict(circuit(1)), "final": ir.to_dict(circuit(1))}))
    assert exc.value.path == "$.steps"
    doc = {"initial": ir.to_dict(circuit(1)), "final": ir.to_dict(circuit(1)),
           "steps": [{"just": "magic", "at": 0, "result": ir.to_dict(circuit(1))}]}
    with pytest.raises(ir.ParseError) as exc:
        prover.load_script(json.dumps(doc))
    assert exc.value.path == "$.steps[0].just"
    with pytest.raises(ir.ParseError):
        prover.load_script("[")


def test_derivation_rejects_inapplicable_rule():
    with pytest.raises(prover.ProverError, match="does not apply"):
        prover.Derivation(circuit(1, gate({0: "dot"}), gate({0: "oplus"}))).rule("c", 0)


def test_proof_i_prime_for_general_conditionals():
    for g in (gate({0: "dot", 1: "oplus"}), gate({0: "ominus", 1: "odot", 2: "dot"}), gate({0: "oplus"})):
        s = prover.proof_i_prime(g)
        assert prover.verify_script(s, strict=True).ok
        assert s.final.elements == ()
    with pytest.raises(prover.ProverError):
        prover.proof_i_prime(gate({0: "dot"}, 0.5))


# --- simplify -----------------------------------------------------------------

def test_simplify_half_half_one_is_empty():
    c = circuit(1, gate({0: "dot"}, 0.5), gate({0: "dot"}, 0.5), gate({0: "dot"}))
    res = prover.simplify(c)
    assert res.converged and res.circuit.elements == ()


def test_simplify_cnot_pair_is_empty():
    res = prover.simplify(circuit(2, gate({0: "dot", 1: "oplus"}), gate({0: "dot", 1: "oplus"})))
    assert res.circuit.elements == ()
    assert [t["step"] for t in res.trace] == ["n_add", "i"]


def test_simplify_orders_disjoint_gates_canonically():
    a = prover.simplify(circuit(2, gate({0: "oplus"}), gate({1: "dot"}))).circuit
    b = prover.simplify(circuit(2, gate({1: "dot"}), gate({0: "oplus"}))).circuit
    assert a == b
    assert a.elements == (gate({0: "oplus"}), gate({1: "dot"}))
    assert sem.equivalent(a, circuit(2, gate({1: "dot"}), gate({0: "oplus"})))


def test_simplify_deletes_identity_controlled_gate(rng):
    u = ir.box("U", sem.random_unitary(2, rng))
    res = prover.simplify(circuit(2, gate({0: ir.identity_box(), 1: u}, 0.3)))
    assert res.circuit.elements == ()


def test_simplify_budget_flag():
    c = circuit(1, *[gate({0: "dot"}, 0.5)] * 4)
    res = prover.simplify(c, max_iters=1)
    assert not res.converged and len(res.trace) == 1


def test_simplify_keeps_hadamard_pair_in_place():
    # H·H merges to H², which the power step deletes
    res = prover.simplify(circuit(1, gate({0: "h"}), gate({0: "h"})))
    assert res.circuit.elements == ()


# --- defer_all_measurements -------------------------------------------------

def test_teleportation_pdm_form():
    out = prover.defer_all_measurements(catalog.teleportation())
    body = out.elements[:6]
    assert body[4] == Gate(gate({2: "oplus"}).occupants + (((1,), ir.Atom("dot")),))
    assert body[5] == gate({0: "dot", 2: "dot"})
    assert out.elements[6:] == (Measurement(1, "m1"), Measurement(0, "m0"))
    assert not out.has_classical_controls


def test_defer_without_measurements_is_identity():
    c = catalog.qft(3)
    assert prover.defer_all_measurements(c) == c


def test_superdense_pdm_form():
    out = prover.defer_all_measurements(catalog.superdense(1, 0))
    assert [e.label() for e in out.elements if isinstance(e, Gate)] == [
        "{2H}", "{2•,3⊕}", "{1•,2⊕}", "{0•,2•}", "{2•,3⊕}", "{2H}"]
    assert isinstance(out.elements[-1], Measurement)


@pytest.mark.parametrize("name", [n for n in catalog.names()
                                  if catalog.build(n).has_measurements])
def test_defer_preserves_channel_on_catalog(name):
    c = catalog.build(name)
    ctx, kept = catalog.context_for(name), catalog.kept_for(name)
    a = sem.circuit_channel(c, kept, ctx)
    b = sem.circuit_channel(prover.defer_all_measurements(c), kept, ctx)
    assert np.abs(a - b).max() < 1e-9


def test_defer_rejects_gate_on_measured_wire():
    c = Circuit(2, (Measurement(0, "m"), gate({0: "oplus"}, cc=("m",))))
    with pytest.raises(prover.ProverError):
        prover.defer_all_measurements(c)


# --- soundness suite ----------------------------------------------------------

def test_hadamard_decompositions_equal_h():
    ds = prover.hadamard_decompositions()
    assert len(ds) == 3
    for c in ds:
        assert np.abs(sem.circuit_unitary(c) - H).max() < 1e-9


def test_conjugation_identities_hold_exactly():
    items = prover.conjugation_identities()
    assert len(items) == 12
    labels = {lab for lab, *_ in items}
    assert {"X(Z)X = -Z", "Z(X)Z = -X", "H(Z)H = X"} <= labels
    for _, f, a, b in items:
        assert np.array_equal(f @ a @ f, b) or np.abs(f @ a @ f - b).max() < 1e-15


def test_soundness_suite_small_run():
    rep = prover.soundness_suite(seed=3, samples=5)
    assert rep.passed
    n_variants = len(prover.all_rule_variants())
    assert len(rep.items) == n_variants + 3 + 12
    assert rep.to_dict()["seed"] == 3


def test_derived_ruleset_pairs_rules_with_strict_proofs():
    drs = prover.derived_ruleset()
    assert [d.rule.name for d in drs] == ["i_prime", "p", "p3", "fivecx", "t_prime", "z"]
    for d in drs:
        assert prover.verify_script(d.proof, strict=True).ok
