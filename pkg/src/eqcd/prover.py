"""
Proof scripts, the greedy simplifier, measurement deferral and the soundness suite.

Contains:
    - ProofStep / ProofScript (+ JSON round trip), load_script(), bundled_scripts()
    - verify_script(): replay a script step by step, strict or permissive
    - Derivation: helper that builds a script by applying rules one step at a time
    - simplify(): terminating normalizer over an oriented rule subset
    - defer_all_measurements(): rules mb and pdm applied exhaustively
    - soundness_suite(): check_rule over every rule variant plus fixed identities
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, Iterable

import numpy as np

from . import rules as R
from . import semantics as sem
from .ir import (H_MATRIX, Circuit, Context, Discard, Gate, IRError, Measurement, ParseError, adjoint,
                 box, circuit, context_from_dict, context_to_dict, fold_atom_powers, from_dict, gate, reduce_mod2,
                 to_dict, validate)

STEP_KINDS = ("structural", "oracle", "context")


class ProverError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ProofStep:
    just: str
    at: int
    result: Circuit
    direction: str = "forward"
    wires: dict = field(default_factory=dict)
    binding: dict = field(default_factory=dict)

    @property
    def rule_name(self) -> str | None:
        return self.just[5:] if self.just.startswith("rule:") else None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"just": self.just, "at": self.at}
        if self.direction != "forward":
            d["direction"] = self.direction
        if self.wires:
            d["wires"] = dict(self.wires)
        if self.binding:
            d["binding"] = self.binding
        d["result"] = to_dict(self.result)
        return d


@dataclass(frozen=True)
class ProofScript:
    initial: Circuit
    steps: tuple
    final: Circuit
    context: Context | None = None
    kept: tuple | None = None
    name: str = ""
    description: str = ""

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.name:
            d["name"] = self.name
        if self.description:
            d["description"] = self.description
        d["initial"] = to_dict(self.initial)
        d["steps"] = [s.to_dict() for s in self.steps]
        d["final"] = to_dict(self.final)
        if self.context is not None:
            d["context"] = context_to_dict(self.context)
        if self.kept is not None:
            d["kept"] = list(self.kept)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, ensure_ascii=False) + "\n"


def script_from_dict(d: Any) -> ProofScript:
    if not isinstance(d, dict):
        raise ParseError("proof script must be a JSON object", "$")
    for key in ("initial", "steps", "final"):
        if key not in d:
            raise ParseError(f"missing field {key!r}", f"$.{key}")
    if not isinstance(d["steps"], list):
        raise ParseError("steps must be a list", "$.steps")
    steps = []
    for i, s in enumerate(d["steps"]):
        path = f"$.steps[{i}]"
        if not isinstance(s, dict):
            raise ParseError("step must be an object", path)
        just = s.get("just")
        if not isinstance(just, str) or not (just.startswith("rule:") or just in STEP_KINDS):
            raise ParseError(f"bad justification {just!r}", f"{path}.just")
        if "result" not in s:
            raise ParseError("missing field 'result'", f"{path}.result")
        at = s.get("at", 0)
        if not isinstance(at, int) or isinstance(at, bool):
            raise ParseError("'at' must be an integer", f"{path}.at")
        direction = s.get("direction", "forward")
        if direction not in ("forward", "backward"):
            raise ParseError("direction must be 'forward' or 'backward'", f"{path}.direction")
        steps.append(ProofStep(just, at, from_dict(s["result"], f"{path}.result"), direction,
                               dict(s.get("wires", {})), dict(s.get("binding", {}))))
    ctx = context_from_dict(d["context"], "$.context") if d.get("context") is not None else None
    kept = tuple(d["kept"]) if d.get("kept") is not None else None
    return ProofScript(from_dict(d["initial"], "$.initial"), tuple(steps), from_dict(d["final"], "$.final"),
                       ctx, kept, str(d.get("name", "")), str(d.get("description", "")))


def load_script(text: str | bytes) -> ProofScript:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (line {exc.lineno})", "$") from exc
    return script_from_dict(data)


BUNDLED = ("i_prime", "g_from_def", "p", "p3", "fivecx", "t_prime", "z", "error_propagation_Z", "qft2_squared")


def bundled_script(name: str) -> ProofScript:
    if name not in BUNDLED:
        raise ProverError(f"unknown bundled script {name!r}; choose from {', '.join(BUNDLED)}")
    text = resources.files("eqcd.proofs").joinpath(f"{name}.proof.json").read_text(encoding="utf-8")
    return load_script(text)


def bundled_scripts() -> dict:
    return {n: bundled_script(n) for n in BUNDLED}


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

@dataclass
class StepVerdict:
    index: int
    just: str
    ok: bool
    message: str = ""
    deviation: float | None = None

    def to_dict(self) -> dict:
        d = {"index": self.index, "just": self.just, "ok": self.ok, "message": self.message}
        if self.deviation is not None:
            d["deviation"] = self.deviation
        return d


@dataclass
class ScriptReport:
    ok: bool
    strict: bool
    steps: list
    endpoint: StepVerdict
    final_matches: bool

    @property
    def oracle_steps(self) -> int:
        return sum(1 for s in self.steps if s.just in ("oracle", "context"))

    def to_dict(self) -> dict:
        return {"ok": self.ok, "strict": self.strict, "final_matches": self.final_matches,
                "oracle_steps": self.oracle_steps, "steps": [s.to_dict() for s in self.steps],
                "endpoint": self.endpoint.to_dict()}


def _semantic_deviation(a: Circuit, b: Circuit, ctx: Context | None = None, kept=None) -> float:
    measured = any(c.has_measurements or c.has_classical_controls for c in (a, b))
    if ctx is not None and ctx.preparations:
        mode = "channel" if measured or kept is not None else "context"
    else:
        mode = "channel" if measured or kept is not None else "exact"
    return sem.equivalent(a, b, mode, ctx=ctx, kept=kept).deviation


def _hint(step: ProofStep) -> R.Binding:
    b = R.binding_from_dict(step.binding, "binding")
    b.wires.update({str(k): int(v) for k, v in step.wires.items()})
    if "form" not in step.binding:
        b.form = None
    return b


def check_rule_step(current: Circuit, step: ProofStep) -> tuple:
    """(ok, message) for a rule-justified step."""
    try:
        rule = R.get_rule(step.rule_name)
    except R.RuleError as exc:
        return False, str(exc)
    hint = _hint(step)
    found, reasons = R.match_with_reasons(rule, current, step.at, step.direction, hint)
    if not found:
        return False, f"no match: {reasons[0]}"
    for b in found:
        try:
            out = R.apply(rule, current, b, step.direction)
        except R.RuleError as exc:
            reasons = [str(exc)]
            continue
        if R.circuits_equal(out, step.result):
            return True, f"{rule.full_name} {step.direction} at {step.at}"
    return False, f"{rule.full_name} applies at {step.at} but does not produce the stated result"


def verify_script(script: ProofScript, strict: bool = False, tol: float = 1e-9) -> ScriptReport:
    """Check every step, then the endpoints; strict mode rejects oracle/context steps."""
    verdicts = []
    current = script.initial
    for i, step in enumerate(script.steps):
        if validate(step.result):
            d = validate(step.result)[0]
            verdicts.append(StepVerdict(i, step.just, False, f"result invalid: {d.invariant}: {d.message}"))
            current = step.result
            continue
        if step.rule_name is not None:
            ok, msg = check_rule_step(current, step)
            verdicts.append(StepVerdict(i, step.just, ok, msg))
        elif step.just == "structural":
            try:
                ok = R.circuits_equal(R.structural_commute(current, step.at), step.result)
                msg = f"commute {step.at},{step.at + 1}" if ok else "structural commute gives a different circuit"
            except R.RuleError as exc:
                ok, msg = False, str(exc)
            verdicts.append(StepVerdict(i, step.just, ok, msg))
        else:
            if strict:
                verdicts.append(StepVerdict(i, step.just, False, f"{step.just} step not allowed in strict mode"))
            else:
                ctx = script.context if step.just == "context" else None
                if step.just == "context" and ctx is None:
                    verdicts.append(StepVerdict(i, step.just, False, "context step but the script has no context"))
                else:
                    try:
                        dev = _semantic_deviation(current, step.result, ctx, script.kept if ctx else None)
                        verdicts.append(StepVerdict(i, step.just, dev <= tol, "numeric equality", dev))
                    except (sem.SemanticsError, IRError) as exc:
                        verdicts.append(StepVerdict(i, step.just, False, str(exc)))
        current = step.result
    final_matches = R.circuits_equal(current, script.final)
    try:
        dev = _semantic_deviation(script.initial, script.final, script.context, script.kept)
        endpoint = StepVerdict(len(script.steps), "endpoint", dev <= tol, "initial ≡ final", dev)
    except (sem.SemanticsError, IRError) as exc:
        endpoint = StepVerdict(len(script.steps), "endpoint", False, str(exc))
    ok = all(v.ok for v in verdicts) and endpoint.ok and final_matches
    return ScriptReport(ok, strict, verdicts, endpoint, final_matches)


class Derivation:
    """Build a script by applying rules forward; each step's result is computed, not typed."""

    def __init__(self, initial: Circuit, name: str = "", description: str = "",
                 context: Context | None = None, kept: Iterable[int] | None = None):
        self.initial = self.current = initial
        self.steps: list[ProofStep] = []
        self.name, self.description, self.context = name, description, context
        self.kept = tuple(kept) if kept is not None else None

    def rule(self, name: str, at: int, direction: str = "forward", wires: dict | None = None,
             binding: dict | None = None, pick: int | None = None) -> "Derivation":
        step = ProofStep(f"rule:{name}", at, self.current, direction, dict(wires or {}), dict(binding or {}))
        rule = R.get_rule(name)
        results = R.rewrite_all(rule, self.current, at, direction, _hint(step))
        if not results:
            _, reasons = R.match_with_reasons(rule, self.current, at, direction, _hint(step))
            raise ProverError(f"step {len(self.steps)}: {name} does not apply at {at}: {reasons[0]}")
        if len(results) > 1 and pick is None:
            raise ProverError(f"step {len(self.steps)}: {name} at {at} is ambiguous ({len(results)} results)")
        self._push(ProofStep(step.just, at, results[pick or 0], direction, step.wires, step.binding))
        return self

    def commute(self, i: int) -> "Derivation":
        self._push(ProofStep("structural", i, R.structural_commute(self.current, i)))
        return self

    def oracle(self, result: Circuit, kind: str = "oracle") -> "Derivation":
        self._push(ProofStep(kind, 0, result))
        return self

    def _push(self, step: ProofStep) -> None:
        self.steps.append(step)
        self.current = step.result

    def script(self) -> ProofScript:
        return ProofScript(self.initial, tuple(self.steps), self.current, self.context, self.kept,
                           self.name, self.description)


# ---------------------------------------------------------------------------
# Simplifier
# ---------------------------------------------------------------------------

@dataclass
class SimplifyResult:
    circuit: Circuit
    trace: list
    converged: bool

    def to_dict(self) -> dict:
        return {"circuit": to_dict(self.circuit), "trace": self.trace, "converged": self.converged}


def _is_involutive(g: Gate) -> bool:
    """Occupants whose Hamiltonians are projectors: symbols and Hadamard."""
    return all(a.kind != "box" for _, a in g.occupants)


def _is_identity_gate(g: Gate) -> bool:
    return any(a.kind == "box" and sem.max_norm(a.matrix - np.eye(a.matrix.shape[0])) <= R.IDENTITY_TOL
               for _, a in g.occupants)


def _simplify_once(c: Circuit) -> tuple:
    els = list(c.elements)
    for i, e in enumerate(els):
        if isinstance(e, Gate) and _is_involutive(e):
            g = fold_atom_powers(e)
            p = reduce_mod2(g.power)
            if p == 0.0:
                return c.with_elements(els[:i] + els[i + 1:]), {"step": "i", "at": i, "action": "delete power ≡ 0 (mod 2)"}
            if g != e or abs(p - e.power) > 0:
                if not (g == e and abs(p - e.power) <= 1e-15):
                    els[i] = g.replace(power=p)
                    return c.with_elements(els), {"step": "n_mul", "at": i, "action": "normalize power mod 2"}
    for i, e in enumerate(els):
        if isinstance(e, Gate) and _is_identity_gate(e):
            return c.with_elements(els[:i] + els[i + 1:]), {"step": "C0", "at": i, "action": "delete identity-controlled gate"}
    for i in range(len(els) - 1):
        x, y = els[i], els[i + 1]
        if isinstance(x, Gate) and isinstance(y, Gate) and x.cc == y.cc:
            gx, gy = x.replace(power=1.0), y.replace(power=1.0)
            if gx == gy:
                merged = x.replace(power=x.power + y.power)
                return c.with_elements(els[:i] + [merged] + els[i + 2:]), {"step": "n_add", "at": i, "action": "merge equal gates"}
    for i in range(len(els) - 1):
        x, y = els[i], els[i + 1]
        if set(x.wires) & set(y.wires) or R._classically_linked(x, y):
            continue
        if min(y.wires) < min(x.wires):
            els[i], els[i + 1] = y, x
            return c.with_elements(els), {"step": "structural", "at": i, "action": "canonical order"}
    return c, None


def simplify(c: Circuit, max_iters: int = 1000) -> SimplifyResult:
    """Greedy normalization: power reduction, C0, merges with cancellation, canonical order."""
    trace = []
    for _ in range(max_iters):
        nxt, step = _simplify_once(c)
        if step is None:
            return SimplifyResult(c, trace, True)
        trace.append(step)
        c = nxt
    return SimplifyResult(c, trace, _simplify_once(c)[1] is None)


# ---------------------------------------------------------------------------
# Measurement deferral
# ---------------------------------------------------------------------------

def defer_all_measurements(c: Circuit) -> Circuit:
    """Rotate labelled bases (mb), quantize classical controls (pdm), measure last."""
    diags = validate(c)
    if diags:
        raise ProverError(f"element {diags[0].index}: {diags[0].invariant}: {diags[0].message}")
    bit_wire: dict[str, int] = {}
    body, tail = [], []
    for e in c.elements:
        if isinstance(e, Measurement):
            if e.basis is not None:
                dag = e.basis.matrix.conj().T
                name = e.basis.name[:-1] if e.basis.name.endswith("†") else e.basis.name + "†"
                body.append(Gate((((e.wire,), box(name, dag)),)))
            bit_wire[e.bit] = e.wire
            tail.append(Measurement(e.wire, e.bit, None))
        elif isinstance(e, Discard):
            tail.append(e)
        else:
            closed = {m.wire for m in tail}
            if closed & set(e.wires):
                raise ProverError(f"gate acts on measured wire(s) {sorted(closed & set(e.wires))}")
            if e.cc:
                extra = []
                for bit in sorted(e.cc):
                    w = bit_wire[bit]
                    if w in e.wires:
                        raise ProverError(f"gate reading bit {bit!r} also acts on its measured wire {w}")
                    extra.append(((w,), R.as_atom("dot")))
                e = Gate(e.occupants + tuple(extra), e.power)
            body.append(e)
    return c.with_elements(body + tail)


# ---------------------------------------------------------------------------
# Soundness suite
# ---------------------------------------------------------------------------

def hadamard_decompositions() -> list:
    """The three symbol circuits that define Hadamard (leftmost gate first)."""
    def z(p=1.0):
        return gate({0: "dot"}, p)

    def o(p=1.0):
        return gate({0: "odot"}, p)

    def x(p=1.0):
        return gate({0: "oplus"}, p)

    return [
        circuit(1, z(0.5), x(0.5), z(0.25), o(-0.25)),
        circuit(1, o(-0.25), z(0.25), x(0.5), z(0.5)),
        circuit(1, x(0.5), z(-0.25), x(-0.5), z(), x(0.5), z(0.25), x(-0.5)),
    ]


_PAULI = {"X": np.array([[0, 1], [1, 0]], dtype=complex), "Z": np.array([[1, 0], [0, -1]], dtype=complex),
          "H": H_MATRIX}


def conjugation_identities() -> list:
    """(label, F, A, expected) with F·A·F = expected, for F ∈ {H, X, Z} and A ∈ {±Z, ±X}."""
    X, Z = _PAULI["X"], _PAULI["Z"]
    table = [("H", Z, X), ("H", -Z, -X), ("H", X, Z), ("H", -X, -Z),
             ("X", Z, -Z), ("X", -Z, Z), ("X", X, X), ("X", -X, -X),
             ("Z", Z, Z), ("Z", -Z, -Z), ("Z", X, -X), ("Z", -X, X)]
    def lab(m):
        for nm, base in (("Z", Z), ("X", X)):
            if np.allclose(m, base):
                return nm
            if np.allclose(m, -base):
                return "-" + nm
        return "?"

    return [(f"{f}({lab(a)}){f} = {lab(b)}", _PAULI[f], a, b) for f, a, b in table]


@dataclass
class SuiteReport:
    items: list
    seed: int

    @property
    def passed(self) -> bool:
        return all(i["passed"] for i in self.items)

    @property
    def max_deviation(self) -> float:
        return max((i["deviation"] for i in self.items), default=0.0)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "passed": self.passed, "max_deviation": self.max_deviation, "items": self.items}


def all_rule_variants() -> list:
    out = []
    for r in R.base_ruleset() + R.derived_rules():
        out.extend(R.closure(r))
    return out


def soundness_suite(seed: int = 42, samples: int = 100, tol: float = 1e-9) -> SuiteReport:
    items = []
    for v in all_rule_variants():
        rep = R.check_rule(v, samples, seed, tol)
        items.append({"item": f"rule:{rep.rule}", "passed": rep.passed, "deviation": rep.max_deviation})
    for k, c in enumerate(hadamard_decompositions()):
        dev = sem.max_norm(sem.circuit_unitary(c) - H_MATRIX)
        items.append({"item": f"hadamard_decomposition_{k + 1}", "passed": dev <= tol, "deviation": dev})
    for label, f, a, b in conjugation_identities():
        dev = sem.max_norm(f @ a @ f - b)
        items.append({"item": f"conjugation {label}", "passed": dev <= tol, "deviation": dev})
    return SuiteReport(items, seed)


# ---------------------------------------------------------------------------
# Derived rules with their proofs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DerivedRule:
    rule: R.Rule
    proof: ProofScript


def derived_ruleset() -> list:
    """Derived rules paired with their bundled strict proof scripts."""
    proofs = {"i_prime": "i_prime", "p": "p", "p3": "p3", "fivecx": "fivecx", "t_prime": "t_prime", "z": "z"}
    return [DerivedRule(r, bundled_script(proofs[r.name])) for r in R.derived_rules()]


def proof_i_prime(g: Gate, n_wires: int | None = None) -> ProofScript:
    """Strict proof that a simple conditional g is an involution: [g, g] → []."""
    if not g.is_symbolic or abs(g.total_power - 1.0) > 1e-12:
        raise ProverError("i' applies to simple conditionals only")
    n = n_wires or (max(g.wires) + 1)
    ws, a = g.occupants[0]
    w = ws[0]
    initial = Circuit(n, (g, g))
    d = Derivation(initial, "i_prime", "simple conditionals are involutions")
    if len(g.occupants) == 1:
        return d.rule(R.INVOLUTION_VARIANT[a.kind], 0).script()
    d.rule(R.CONTROL_VARIANT["d"][a.kind], 0, wires={"a": w})
    d.rule("C0", 0)
    return d.script()
