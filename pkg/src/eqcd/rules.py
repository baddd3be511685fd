"""
Rewrite rules over diagrams: patterns, matching, application, flipflop closure.

Contains:
    - pattern templates (Sym, FixedBox, IdBox, AtomVar, GateT, MeasT) and power expressions
    - Rule / Form / Binding / Fragment
    - base_ruleset(), derived rule definitions (proofs live in prover)
    - flip_z(), flip_x(), flop(), closure(), get_rule()
    - match(), apply(), structural_commute()
    - check_rule(): randomized numerical soundness check

A rule is a list of forms (lhs, rhs). Forward application rewrites an lhs
instance into the rhs; backward goes the other way. Metavariables:
    - rest fragments (U, V, ...): the occupants of a gate not matched by
      explicit symbols, optionally carrying the gate power;
    - atom variables: one arbitrary occupant;
    - power variables (alpha, beta), wire variables (a, b, c), bit variables.
Variables that the source side cannot determine come from `definitions`
(e.g. the fused box of rule d) or must be supplied through a hint binding.

Flips and flops act by conjugating every wire that carries an explicit symbol
with X, Z or H. On dots and circles this is the familiar symbol substitution;
Hadamard atoms and measurement bases on those wires are conjugated as well,
which keeps every variant sound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable

import numpy as np

from . import semantics as sem
from .ir import (H_MATRIX, SYMBOLS, Atom, Circuit, Discard, Gate, IRError, Measurement,
                 as_atom, box, element_to_dict, from_dict, matrix_from_json, matrix_to_json,
                 permute_qubits, validate, _atom_to_json)

PREMISE_TOL = 1e-9
IDENTITY_TOL = 1e-9
EXPR_TOL = 1e-12


class RuleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Power expressions: ("c", v) | ("v", name) | ("+", a, b) | ("*", a, b)
# ---------------------------------------------------------------------------

ONE = ("c", 1.0)


def C(v: float) -> tuple:
    return ("c", float(v))


def V(name: str) -> tuple:
    return ("v", name)


def add(a, b) -> tuple:
    return ("+", a, b)


def mul(a, b) -> tuple:
    return ("*", a, b)


def expr_vars(e) -> set:
    if e is None or e[0] == "c":
        return set()
    if e[0] == "v":
        return {e[1]}
    return expr_vars(e[1]) | expr_vars(e[2])


def expr_eval(e, powers: dict):
    if e[0] == "c":
        return e[1]
    if e[0] == "v":
        return powers.get(e[1])
    x, y = expr_eval(e[1], powers), expr_eval(e[2], powers)
    if x is None or y is None:
        return None
    return x + y if e[0] == "+" else x * y


def expr_str(e) -> str:
    if e[0] == "c":
        return f"{e[1]:g}"
    if e[0] == "v":
        return e[1]
    op = "+" if e[0] == "+" else "·"
    return f"({expr_str(e[1])}{op}{expr_str(e[2])})"


# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sym:
    """Explicit symbol or Hadamard on one wire variable."""
    kind: str
    wire: str
    power: tuple = ONE


@dataclass(frozen=True, eq=False)
class FixedBox:
    """Explicit named unitary on an ordered tuple of wire variables."""
    name: str
    matrix: np.ndarray
    wires: tuple
    power: tuple = ONE


@dataclass(frozen=True)
class IdBox:
    """Any identity box (rule C0's empty control); binds an atom variable."""
    var: str


@dataclass(frozen=True)
class AtomVar:
    """One arbitrary occupant; the template power is matched against the atom's number."""
    name: str
    power: tuple = ONE


@dataclass(frozen=True)
class GateT:
    occs: tuple = ()
    rest: str | None = None
    power: tuple | None = ONE       # None: the gate power belongs to the rest fragment
    cc: tuple = ()


@dataclass(frozen=True, eq=False)
class FixedBasis:
    name: str
    matrix: np.ndarray


def canonical_basis(m: np.ndarray) -> np.ndarray:
    """Measurement basis with each column's phase fixed (first non-zero entry real positive).

    Column phases do not change the measurement, so bases are compared in this form.
    """
    m = np.array(m, dtype=complex)
    for k in range(m.shape[1]):
        j = int(np.argmax(np.abs(m[:, k]) > 1e-9))
        m[:, k] *= abs(m[j, k]) / m[j, k]
    return m


@dataclass(frozen=True)
class MeasT:
    wire: str
    bit: str
    basis: Any = None               # None | FixedBasis | str (basis metavariable)


@dataclass(frozen=True)
class Form:
    lhs: tuple
    rhs: tuple


@dataclass(frozen=True, eq=False)
class Fragment:
    """Occupants plus exponent, i.e. an uncontrolled gate U = exp(iπ p H_occ)."""
    occupants: tuple
    power: float = 1.0

    @property
    def wires(self) -> tuple:
        return tuple(sorted(w for ws, _ in self.occupants for w in ws))

    def as_gate(self) -> Gate:
        return Gate(self.occupants, self.power)

    def matrix_on(self, wires: Iterable[int]) -> np.ndarray:
        wires = list(wires)
        g = self.as_gate()
        lw, op = sem.gate_local(g)
        local = [wires.index(w) for w in lw]
        return sem.embed(op, local, len(wires))

    def label(self) -> str:
        body = ",".join(f"{'/'.join(map(str, ws))}{a.label()}" for ws, a in self.occupants) or "·"
        return body if abs(self.power - 1.0) <= EXPR_TOL else f"{body}^{self.power:.6g}"

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Fragment) and self.as_gate() == other.as_gate()

    def __hash__(self) -> int:
        return hash(self.wires)


@dataclass
class Binding:
    form: int = 0
    anchor: int = 0
    wires: dict = field(default_factory=dict)
    powers: dict = field(default_factory=dict)
    frags: dict = field(default_factory=dict)
    atoms: dict = field(default_factory=dict)
    bits: dict = field(default_factory=dict)
    bases: dict = field(default_factory=dict)

    def copy(self) -> "Binding":
        return Binding(self.form, self.anchor, dict(self.wires), dict(self.powers), dict(self.frags),
                       dict(self.atoms), dict(self.bits), dict(self.bases))

    def merged(self, hint: "Binding | None") -> "Binding":
        b = self.copy()
        if hint is not None:
            for f in ("wires", "powers", "frags", "atoms", "bits", "bases"):
                getattr(b, f).update(getattr(hint, f))
        return b

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"form": self.form}
        if self.wires:
            d["wires"] = dict(self.wires)
        if self.powers:
            d["powers"] = dict(self.powers)
        if self.frags:
            d["fragments"] = {k: fragment_to_dict(v) for k, v in self.frags.items()}
        if self.atoms:
            d["atoms"] = {k: {"wires": list(ws), "atom": _atom_to_json(ws, a)} for k, (ws, a) in self.atoms.items()}
        if self.bits:
            d["bits"] = dict(self.bits)
        if self.bases:
            d["bases"] = {k: {"name": a.name, "matrix": matrix_to_json(a.matrix)} for k, a in self.bases.items()}
        return d


def fragment_to_dict(f: Fragment) -> dict:
    return {"occupants": {str(ws[0]): _atom_to_json(ws, a) for ws, a in f.occupants}, "power": f.power}


def fragment_from_dict(d: Any, path: str) -> Fragment:
    if not isinstance(d, dict):
        raise RuleError(f"{path}: fragment must be an object")
    occ = d.get("occupants", {})
    if occ:
        g = from_dict({"n_wires": 64, "elements": [{"type": "gate", "occupants": occ}]}, path, check=False).elements[0]
        occupants = g.occupants
    else:
        occupants = ()
    return Fragment(occupants, float(d.get("power", 1.0)))


def binding_from_dict(d: Any, path: str = "binding") -> Binding:
    if d is None:
        return Binding()
    if not isinstance(d, dict):
        raise RuleError(f"{path}: binding must be an object")
    b = Binding(form=int(d.get("form", 0)))
    b.wires = {str(k): int(v) for k, v in d.get("wires", {}).items()}
    b.powers = {str(k): float(v) for k, v in d.get("powers", {}).items()}
    b.frags = {str(k): fragment_from_dict(v, f"{path}.fragments.{k}") for k, v in d.get("fragments", {}).items()}
    for k, v in d.get("atoms", {}).items():
        g = from_dict({"n_wires": 64, "elements": [{"type": "gate", "occupants": {str(v["wires"][0]): v["atom"]}}]},
                      f"{path}.atoms.{k}", check=False).elements[0]
        b.atoms[str(k)] = g.occupants[0]
    b.bits = {str(k): str(v) for k, v in d.get("bits", {}).items()}
    b.bases = {str(k): box(v.get("name", k), matrix_from_json(v["matrix"], f"{path}.bases.{k}"))
               for k, v in d.get("bases", {}).items()}
    return b


# ---------------------------------------------------------------------------
# Rules
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Definition:
    target: str                      # metavariable name
    kind: str                        # "frag" | "atom" | "basis"
    needs: tuple
    fn: Callable


@dataclass(frozen=True)
class Rule:
    name: str
    forms: tuple
    description: str = ""
    definitions: tuple = ()
    premises: tuple = ()             # (description, fn(binding) -> deviation)
    constraints: tuple = ()          # (description, fn(binding) -> bool)
    sampling: Any = None             # {meta: profile} for check_rule
    base: str = ""
    word: tuple = ()
    derived: bool = False

    @property
    def full_name(self) -> str:
        return ".".join((self.base or self.name,) + self.word)

    @property
    def has_measurement(self) -> bool:
        return any(isinstance(t, MeasT) for f in self.forms for t in f.lhs + f.rhs)


# ---------------------------------------------------------------------------
# Matching
# ---------------------------------------------------------------------------

def _match_expr(e, value: float, b: Binding) -> bool:
    v = expr_eval(e, b.powers)
    if v is not None:
        return abs(v - value) <= EXPR_TOL * (1.0 + abs(v))
    if e[0] == "v":
        b.powers[e[1]] = value
        return True
    return False


def _bind_wire(var: str, w: int, b: Binding) -> bool:
    if var in b.wires:
        return b.wires[var] == w
    if w in b.wires.values():
        return False
    b.wires[var] = w
    return True


def _bind_bit(var: str, bit: str, b: Binding) -> bool:
    if var in b.bits:
        return b.bits[var] == bit
    if bit in b.bits.values():
        return False
    b.bits[var] = bit
    return True


def _template_matrix(t: FixedBox, assigned: list) -> np.ndarray:
    order = sorted(range(len(assigned)), key=lambda i: assigned[i])
    return permute_qubits(t.matrix, order)


def _match_occ(t, ws: tuple, a: Atom, b: Binding) -> bool:
    if isinstance(t, Sym):
        if a.kind != t.kind or len(ws) != 1:
            return False
        return _bind_wire(t.wire, ws[0], b) and _match_expr(t.power, a.power, b)
    if isinstance(t, IdBox):
        if a.kind != "box" or sem.max_norm(a.matrix - np.eye(a.matrix.shape[0])) > IDENTITY_TOL:
            return False
        if t.var in b.atoms:
            return b.atoms[t.var][0] == ws and b.atoms[t.var][1].with_power(a.power) == a
        b.atoms[t.var] = (ws, a)
        return True
    if isinstance(t, AtomVar):
        if not _match_expr(t.power, a.power, b):
            return False
        core = a.with_power(1.0)
        if t.name in b.atoms:
            bws, ba = b.atoms[t.name]
            return bws == ws and ba == core
        b.atoms[t.name] = (ws, core)
        return True
    raise AssertionError(t)


def _fixedbox_assignments(t: FixedBox, ws: tuple, a: Atom, b: Binding):
    if a.kind != "box" or len(ws) != len(t.wires):
        return
    for perm in itertools.permutations(ws):
        nb = b.copy()
        if not all(_bind_wire(v, w, nb) for v, w in zip(t.wires, perm)):
            continue
        if sem.max_norm(_template_matrix(t, list(perm)) - a.matrix) > IDENTITY_TOL:
            continue
        if _match_expr(t.power, a.power, nb):
            yield nb


def _match_gate(t: GateT, g: Gate, b: Binding):
    if len(t.cc) != len(g.cc):
        return
    for bits in itertools.permutations(sorted(g.cc)):
        b0 = b.copy()
        if not all(_bind_bit(v, x, b0) for v, x in zip(t.cc, bits)):
            continue
        yield from _match_occs(t, list(t.occs), g, list(range(len(g.occupants))), b0)


def _match_occs(t: GateT, todo: list, g: Gate, free: list, b: Binding):
    if todo:
        head, tail = todo[0], todo[1:]
        for i in free:
            ws, a = g.occupants[i]
            rest = [j for j in free if j != i]
            if isinstance(head, FixedBox):
                for nb in _fixedbox_assignments(head, ws, a, b):
                    yield from _match_occs(t, tail, g, rest, nb)
            else:
                nb = b.copy()
                if _match_occ(head, ws, a, nb):
                    yield from _match_occs(t, tail, g, rest, nb)
        return
    nb = b.copy()
    remaining = tuple(g.occupants[i] for i in free)
    if t.rest is None:
        if remaining:
            return
    else:
        frag = Fragment(remaining, g.power if t.power is None else 1.0)
        if t.rest in nb.frags:
            if nb.frags[t.rest] != frag:
                return
        else:
            nb.frags[t.rest] = frag
    if t.power is not None and not _match_expr(t.power, g.power, nb):
        return
    yield nb


def _match_meas(t: MeasT, m: Measurement, b: Binding):
    nb = b.copy()
    if not (_bind_wire(t.wire, m.wire, nb) and _bind_bit(t.bit, m.bit, nb)):
        return
    if t.basis is None:
        if m.basis is not None:
            return
    elif isinstance(t.basis, FixedBasis):
        if m.basis is None or sem.max_norm(canonical_basis(m.basis.matrix) - canonical_basis(t.basis.matrix)) > IDENTITY_TOL:
            return
    else:
        if m.basis is None:
            return
        if t.basis in nb.bases:
            if nb.bases[t.basis] != m.basis:
                return
        else:
            nb.bases[t.basis] = m.basis
    yield nb


def _match_seq(templates: list, elements: list, b: Binding):
    if not templates:
        yield b
        return
    t, e = templates[0], elements[0]
    if isinstance(t, GateT):
        if not isinstance(e, Gate):
            return
        gen = _match_gate(t, e, b)
    else:
        if not isinstance(e, Measurement):
            return
        gen = _match_meas(t, e, b)
    for nb in gen:
        yield from _match_seq(templates[1:], elements[1:], nb)


# ---------------------------------------------------------------------------
# Resolution, instantiation
# ---------------------------------------------------------------------------

def _resolve(rule: Rule, b: Binding) -> None:
    changed = True
    while changed:
        changed = False
        for d in rule.definitions:
            store = {"frag": b.frags, "atom": b.atoms, "basis": b.bases}[d.kind]
            if d.target in store:
                continue
            if all(_has_var(b, n) for n in d.needs):
                store[d.target] = d.fn(b)
                changed = True


def _has_var(b: Binding, name: str) -> bool:
    return any(name in s for s in (b.wires, b.powers, b.frags, b.atoms, b.bits, b.bases))


def _inst_occ(t, b: Binding) -> tuple:
    def pw(e):
        v = expr_eval(e, b.powers)
        if v is None:
            raise RuleError(f"binding incomplete: power {expr_str(e)} undetermined")
        return v

    def wire(v):
        if v not in b.wires:
            raise RuleError(f"binding incomplete: wire variable {v!r} unbound")
        return b.wires[v]

    if isinstance(t, Sym):
        return ((wire(t.wire),), as_atom(t.kind).with_power(pw(t.power)))
    if isinstance(t, FixedBox):
        return (tuple(wire(v) for v in t.wires), Atom("box", t.name, t.matrix, pw(t.power)))
    if isinstance(t, IdBox):
        if t.var not in b.atoms:
            raise RuleError(f"binding incomplete: identity box {t.var!r} unbound")
        return b.atoms[t.var]
    if isinstance(t, AtomVar):
        if t.name not in b.atoms:
            raise RuleError(f"binding incomplete: atom {t.name!r} unbound")
        ws, a = b.atoms[t.name]
        return (ws, a.with_power(pw(t.power)))
    raise AssertionError(t)


def instantiate(templates: Iterable, b: Binding) -> list:
    out = []
    for t in templates:
        if isinstance(t, GateT):
            occs = [_inst_occ(o, b) for o in t.occs]
            power = None
            if t.rest is not None:
                if t.rest not in b.frags:
                    raise RuleError(f"binding incomplete: fragment {t.rest!r} unbound")
                f = b.frags[t.rest]
                occs.extend(f.occupants)
                power = f.power
            if t.power is not None:
                power = expr_eval(t.power, b.powers)
                if power is None:
                    raise RuleError(f"binding incomplete: power {expr_str(t.power)} undetermined")
            for v in t.cc:
                if v not in b.bits:
                    raise RuleError(f"binding incomplete: bit variable {v!r} unbound")
            seen: set = set()
            for ws, _ in occs:
                if seen & set(ws):
                    raise RuleError(f"instantiated gate occupies wire(s) {sorted(seen & set(ws))} twice")
                seen |= set(ws)
            if not occs:
                raise RuleError("instantiated gate has no occupants")
            out.append(Gate(tuple(occs), power, frozenset(b.bits[v] for v in t.cc)))
        else:
            if t.wire not in b.wires or t.bit not in b.bits:
                raise RuleError("binding incomplete: measurement wire/bit unbound")
            if t.basis is None:
                basis = None
            elif isinstance(t.basis, FixedBasis):
                basis = box(t.basis.name, t.basis.matrix)
            else:
                if t.basis not in b.bases:
                    raise RuleError(f"binding incomplete: basis {t.basis!r} unbound")
                basis = b.bases[t.basis]
            out.append(Measurement(b.wires[t.wire], b.bits[t.bit], basis))
    return out


def _sides(rule: Rule, form: int, direction: str) -> tuple:
    f = rule.forms[form]
    if direction == "forward":
        return f.lhs, f.rhs
    if direction == "backward":
        return f.rhs, f.lhs
    raise RuleError(f"direction must be forward or backward, got {direction!r}")


def _finish(rule: Rule, b: Binding, target: tuple):
    """Complete a source-side binding; returns (binding, None) or (None, reason)."""
    _resolve(rule, b)
    for desc, fn in rule.constraints:
        try:
            ok = fn(b)
        except KeyError:
            ok = True                # constraint refers to a variable this form does not use
        if not ok:
            return None, f"constraint violated: {desc}"
    for desc, fn in rule.premises:
        try:
            dev = fn(b)
        except KeyError:
            continue
        if dev > PREMISE_TOL:
            return None, f"premise violated: {desc} (deviation {dev:.3g})"
    try:
        instantiate(target, b)
    except (RuleError, IRError) as exc:
        return None, str(exc)
    return b, None


def match_with_reasons(rule: Rule, c: Circuit, anchor: int, direction: str = "forward",
                       hint: Binding | None = None) -> tuple:
    found, reasons = [], []
    forms = [hint.form] if hint is not None and hint.form is not None and len(rule.forms) > 1 else range(len(rule.forms))
    for fi in forms:
        if not 0 <= fi < len(rule.forms):
            reasons.append(f"form {fi} out of range")
            continue
        source, target = _sides(rule, fi, direction)
        start = Binding(form=fi, anchor=anchor).merged(hint)
        start.form, start.anchor = fi, anchor
        if anchor < 0 or anchor + len(source) > len(c.elements):
            reasons.append("pattern runs past the end of the circuit")
            continue
        window = list(c.elements[anchor:anchor + len(source)])
        for b in _match_seq(list(source), window, start):
            done, why = _finish(rule, b, target)
            if done is None:
                reasons.append(why)
                continue
            if any(w >= c.n_wires for w in done.wires.values()):
                reasons.append("wire variable bound outside the circuit")
                continue
            found.append(done)
    if not found and not reasons:
        reasons.append("no match")
    return found, reasons


def match(rule: Rule, c: Circuit, anchor: int, direction: str = "forward",
          hint: Binding | None = None) -> list:
    """All complete bindings of the rule's source side at elements[anchor:]."""
    return match_with_reasons(rule, c, anchor, direction, hint)[0]


def apply(rule: Rule, c: Circuit, binding: Binding, direction: str = "forward",
          verify: bool = False) -> Circuit:
    """Replace the matched source span by the instantiated target side."""
    source, target = _sides(rule, binding.form, direction)
    found, reasons = match_with_reasons(rule, c, binding.anchor, direction, binding)
    if not found:
        raise RuleError(f"rule {rule.full_name} does not apply at {binding.anchor}: {reasons[0]}")
    b = found[0]
    new = instantiate(target, b)
    out = c.with_elements(c.elements[:b.anchor] + tuple(new) + c.elements[b.anchor + len(source):])
    diags = validate(out)
    if diags:
        raise RuleError(f"rewrite produces an invalid circuit: {diags[0].invariant}: {diags[0].message}")
    if verify:
        dev = _semantic_gap(c, out)
        if dev > 1e-9:
            raise RuleError(f"rewrite changed semantics by {dev:.3g}")
    return out


def _semantic_gap(a: Circuit, b: Circuit) -> float:
    if a.has_measurements or b.has_measurements or a.has_classical_controls or b.has_classical_controls:
        return sem.max_norm(sem.circuit_channel(a) - sem.circuit_channel(b))
    return sem.max_norm(sem.circuit_unitary(a) - sem.circuit_unitary(b))


def rewrite_all(rule: Rule, c: Circuit, anchor: int, direction: str = "forward",
                hint: Binding | None = None) -> list:
    """Distinct circuits reachable by one application at `anchor`."""
    out: list[Circuit] = []
    for b in match(rule, c, anchor, direction, hint):
        try:
            r = apply(rule, c, b, direction)
        except RuleError:
            continue
        if not any(circuits_equal(r, x) for x in out):
            out.append(r)
    return out


def circuits_equal(a: Circuit, b: Circuit) -> bool:
    return a.n_wires == b.n_wires and len(a.elements) == len(b.elements) and all(
        x == y for x, y in zip(a.elements, b.elements))


def structural_commute(c: Circuit, i: int) -> Circuit:
    """Swap elements i and i+1 when they act on disjoint wires with no classical link."""
    if not 0 <= i < len(c.elements) - 1:
        raise RuleError(f"structural_commute: index {i} out of range")
    x, y = c.elements[i], c.elements[i + 1]
    if set(x.wires) & set(y.wires):
        raise RuleError(f"structural_commute: elements {i} and {i + 1} overlap on wires {sorted(set(x.wires) & set(y.wires))}")
    if _classically_linked(x, y):
        raise RuleError(f"structural_commute: elements {i} and {i + 1} share a classical bit")
    els = list(c.elements)
    els[i], els[i + 1] = y, x
    return c.with_elements(els)


def _classically_linked(x, y) -> bool:
    def produced(e):
        return {e.bit} if isinstance(e, Measurement) else set()

    def read(e):
        return set(e.cc) if isinstance(e, Gate) else set()

    return bool(produced(x) & read(y) or produced(y) & read(x) or produced(x) & produced(y))


# ---------------------------------------------------------------------------
# Helper constructions used by definitions and premises
# ---------------------------------------------------------------------------

def _union(*frags: Fragment) -> list:
    return sorted(set().union(*(f.wires for f in frags)))


def fuse(u: Fragment, v: Fragment) -> Fragment:
    """U followed by V as one box on the union of their wires (matrix V·U)."""
    wires = _union(u, v)
    if not wires:
        raise RuleError("cannot fuse two empty fragments")
    m = v.matrix_on(wires) @ u.matrix_on(wires)
    return Fragment(((tuple(wires), box(f"({u.label()}∘{v.label()})", m)),), 1.0)


def conj_fragment(u: Fragment, v: Fragment, inverse: bool) -> Fragment:
    """U†VU (inverse=False) or UVU† (inverse=True) as a box on the union wires."""
    wires = _union(u, v)
    mu, mv = u.matrix_on(wires), v.matrix_on(wires)
    if inverse:
        m, name = mu @ mv @ mu.conj().T, f"({u.label()}·{v.label()}·{u.label()}†)"
    else:
        m, name = mu.conj().T @ mv @ mu, f"({u.label()}†·{v.label()}·{u.label()})"
    return Fragment(((tuple(wires), box(name, m)),), 1.0)


def relabel(f: Fragment, mapping: dict) -> Fragment:
    return Fragment(tuple((tuple(mapping.get(w, w) for w in ws), a) for ws, a in f.occupants), f.power)


def _swap_map(b: Binding) -> dict:
    return {b.wires["a"]: b.wires["b"], b.wires["b"]: b.wires["a"]}


def _premise_d(b: Binding) -> float:
    u, v, w = b.frags["U"], b.frags["V"], b.frags["W"]
    wires = _union(u, v, w)
    return sem.max_norm(w.matrix_on(wires) - v.matrix_on(wires) @ u.matrix_on(wires))


def _premise_g(b: Binding) -> float:
    u, v, vp = b.frags["U"], b.frags["V"], b.frags["Vp"]
    wires = _union(u, v, vp)
    mu, mv, mvp = (x.matrix_on(wires) for x in (u, v, vp))
    return sem.max_norm(mv @ mu - mu @ mvp)


def _premise_t(b: Binding) -> float:
    return 0.0 if relabel(b.frags["U"], _swap_map(b)) == b.frags["Uba"] else 1.0


def _atom_matrix(ws: tuple, a: Atom) -> np.ndarray:
    return sem.gate_local(Gate(((ws, a),)))[1]


# ---------------------------------------------------------------------------
# Rule library
# ---------------------------------------------------------------------------

SWAP_MATRIX = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def G(*occs, rest=None, power=ONE, cc=()) -> GateT:
    return GateT(tuple(occs), rest, power, tuple(cc))


def s(kind: str, wire: str, power=ONE) -> Sym:
    return Sym(kind, wire, power)


def swap_t(a="a", b="b") -> GateT:
    return G(FixedBox("SWAP", SWAP_MATRIX, (a, b)))


def cx_t(c, t) -> GateT:
    return G(s("dot", c), s("oplus", t))


def _def_frag(target, needs, fn) -> Definition:
    return Definition(target, "frag", tuple(needs), fn)


def _basis_dagger(b: Binding) -> tuple:
    basis = b.bases["B"]
    name = basis.name[:-1] if basis.name.endswith("†") else basis.name + "†"
    return ((b.wires["a"],), box(name, basis.matrix.conj().T))


def _basis_from_gate(b: Binding) -> Atom:
    ws, a = b.atoms["Bdg"]
    m = _atom_matrix(ws, a).conj().T
    name = a.name[:-1] if a.kind == "box" and a.name.endswith("†") else (a.name or a.kind) + "†"
    return box(name, m)


def _not_on(var: str, meta: str):
    return lambda b: b.wires[var] not in b.frags[meta].wires


def base_ruleset() -> list:
    al, be = V("alpha"), V("beta")
    rules = [
        Rule("c", (Form((G(s("dot", "a"), power=al), G(s("odot", "a"), power=be)),
                        (G(s("odot", "a"), power=be), G(s("dot", "a"), power=al))),),
             "same-type symbols commute regardless of their powers"),
        Rule("ac", (Form((G(s("dot", "a"), power=al), G(s("oplus", "a"))),
                         (G(s("oplus", "a")), G(s("odot", "a"), power=al))),
                    Form((G(s("odot", "a"), power=al), G(s("oplus", "a"))),
                         (G(s("oplus", "a")), G(s("dot", "a"), power=al)))),
             "a symbol passing an opposite-typed numberless symbol flips"),
        Rule("H", (Form((G(s("dot", "a"), power=al), G(s("h", "a"))),
                        (G(s("h", "a")), G(s("oplus", "a"), power=al))),
                   Form((G(s("odot", "a"), power=al), G(s("h", "a"))),
                        (G(s("h", "a")), G(s("ominus", "a"), power=al)))),
             "Hadamard exchanges the two symbol types"),
        Rule("i", (Form((G(s("dot", "a")), G(s("dot", "a"))), ()),
                   Form((G(s("dot", "a"), power=C(2)),), ()),
                   Form((G(s("h", "a")), G(s("h", "a"))), ()),
                   Form((G(s("h", "a"), power=C(2)),), ())),
             "symbols and Hadamard are involutions"),
        Rule("C0", (Form((G(IdBox("I"), rest="U", power=al),), ()),),
             "an identity occupant deletes the whole gate",
             constraints=(("identity box disjoint from U", lambda b: not (set(b.atoms["I"][0]) & set(b.frags["U"].wires))),)),
        Rule("d", (Form((G(s("dot", "a"), rest="U", power=None), G(s("dot", "a"), rest="V", power=None)),
                        (G(s("dot", "a"), rest="W", power=None),)),),
             "controls distribute over composition: CU∘CV = C(U∘V)",
             definitions=(_def_frag("W", ("U", "V"), lambda b: fuse(b.frags["U"], b.frags["V"])),),
             premises=(("W = U∘V", _premise_d),),
             constraints=(("U and V not both empty", lambda b: bool(_union(b.frags["U"], b.frags["V"]))),)),
        Rule("e", (Form((G(rest="U", power=None),),
                        (G(s("odot", "a"), rest="U", power=None), G(s("dot", "a"), rest="U", power=None))),),
             "an uncontrolled gate equals its expansion over a complete control basis",
             constraints=(("control wire not used by U", _not_on("a", "U")),
                          ("U non-empty", lambda b: bool(b.frags["U"].occupants)))),
        Rule("f", (Form((G(s("odot", "a"), rest="U", power=None), G(s("dot", "a"), rest="V", power=None)),
                        (G(s("dot", "a"), rest="V", power=None), G(s("odot", "a"), rest="U", power=None))),),
             "oppositely controlled gates commute"),
        Rule("g", (Form((G(rest="U", power=None), G(s("dot", "a"), rest="V", power=None)),
                        (G(s("dot", "a"), rest="Vp", power=None), G(rest="U", power=None))),),
             "if U∘V = V'∘U then U commutes past CV, turning it into CV'",
             definitions=(_def_frag("Vp", ("U", "V"), lambda b: conj_fragment(b.frags["U"], b.frags["V"], False)),
                          _def_frag("V", ("U", "Vp"), lambda b: conj_fragment(b.frags["U"], b.frags["Vp"], True))),
             premises=(("U∘V = V'∘U", _premise_g),),
             constraints=(("control wire not used by U", _not_on("a", "U")),
                          ("U non-empty", lambda b: bool(b.frags["U"].occupants)))),
        Rule("s", (Form((swap_t(),), (cx_t("a", "b"), cx_t("b", "a"), cx_t("a", "b"))),),
             "SWAP equals three alternating CNOTs"),
        Rule("t", (Form((swap_t(), G(rest="U", power=None)), (G(rest="Uba", power=None), swap_t())),),
             "a gate moving past SWAP is turned upside-down",
             definitions=(_def_frag("Uba", ("U", "a", "b"), lambda b: relabel(b.frags["U"], _swap_map(b))),
                          _def_frag("U", ("Uba", "a", "b"), lambda b: relabel(b.frags["Uba"], _swap_map(b)))),
             premises=(("U_BA is U with A and B exchanged", _premise_t),),
             constraints=(("U acts within the swapped pair", lambda b: set(b.frags["U"].wires) <= {b.wires["a"], b.wires["b"]}),
                          ("U non-empty", lambda b: bool(b.frags["U"].occupants))),
             sampling={"U": ("within", ("a", "b"))}),
        Rule("n_add", (Form((G(rest="U", power=al), G(rest="U", power=be)), (G(rest="U", power=add(al, be)),)),),
             "powers of the same gate in series add",
             constraints=(("U non-empty", lambda b: bool(b.frags["U"].occupants)),)),
        Rule("n_mul", (Form((G(AtomVar("X", al), rest="W", power=be),), (G(AtomVar("X", ONE), rest="W", power=mul(al, be)),)),),
             "numbers along a vertical line multiply into the gate power"),
        Rule("pdm", (Form((MeasT("a", "m"), G(rest="U", power=None, cc=("m",))),
                          (G(s("dot", "a"), rest="U", power=None), MeasT("a", "m"))),),
             "measurement followed by a classically controlled gate equals the quantum-controlled gate then measurement",
             constraints=(("measured wire not used by U", _not_on("a", "U")),
                          ("U non-empty", lambda b: bool(b.frags["U"].occupants)))),
        Rule("mb", (Form((MeasT("a", "m", basis="B"),), (G(AtomVar("Bdg"),), MeasT("a", "m"))),),
             "measuring in basis U equals applying U† then measuring in the computational basis",
             definitions=(Definition("Bdg", "atom", ("B", "a"), _basis_dagger),
                          Definition("B", "basis", ("Bdg",), _basis_from_gate)),
             constraints=(("basis gate sits on the measured wire", lambda b: b.atoms["Bdg"][0] == (b.wires["a"],)),)),
    ]
    return [replace(r, base=r.name) for r in rules]


def derived_rules() -> list:
    """Derived rules (proof scripts attached by prover.derived_ruleset)."""
    al = V("alpha")
    symbolic = ("U is a simple conditional", lambda b: bool(b.frags["U"].occupants) and
                all(a.is_symbol and abs(a.power - 1.0) <= EXPR_TOL for _, a in b.frags["U"].occupants))
    rules = [
        Rule("i_prime", (Form((G(rest="U"), G(rest="U")), ()),),
             "every simple conditional is an involution", constraints=(symbolic,),
             sampling={"U": "symbolic"}),
        Rule("p", (Form((G(s("dot", "a")), G(s("dot", "b"))),
                        (G(s("odot", "a"), s("dot", "b")), G(s("dot", "a"), s("odot", "b")))),),
             "two unconnected dots equal the two odd-parity conditionals"),
        Rule("p3", (Form((G(s("dot", "a")), G(s("dot", "b")), G(s("dot", "c"))),
                         (G(s("odot", "a"), s("odot", "b"), s("dot", "c")),
                          G(s("odot", "a"), s("dot", "b"), s("odot", "c")),
                          G(s("dot", "a"), s("odot", "b"), s("odot", "c")),
                          G(s("dot", "a"), s("dot", "b"), s("dot", "c")))),),
             "three unconnected dots equal the four odd-parity conditionals"),
        Rule("fivecx", (Form((cx_t("b", "c"), cx_t("a", "b"), cx_t("b", "c")),
                             (cx_t("a", "b"), cx_t("a", "c"))),),
             "three partially overlapping CNOTs equal two CNOTs sharing a control"),
        Rule("t_prime", (Form((swap_t(), swap_t()), ()),
                         Form((swap_t(), G(rest="U", power=None), swap_t()), (G(rest="Uba", power=None),))),
             "SWAP is an involution, and sandwiching by SWAPs turns a gate upside-down",
             definitions=(_def_frag("Uba", ("U", "a", "b"), lambda b: relabel(b.frags["U"], _swap_map(b))),
                          _def_frag("U", ("Uba", "a", "b"), lambda b: relabel(b.frags["Uba"], _swap_map(b)))),
             premises=(("U_BA is U with A and B exchanged", _premise_t),),
             constraints=(("U acts within the swapped pair", lambda b: set(b.frags["U"].wires) <= {b.wires["a"], b.wires["b"]}),
                          ("U non-empty", lambda b: bool(b.frags["U"].occupants))),
             sampling={"U": ("within", ("a", "b")), "Uba": ("within", ("a", "b"))}),
        Rule("z", (Form((cx_t("a", "b"), G(s("dot", "b"), power=al), cx_t("a", "b")),
                        (G(s("odot", "a"), s("dot", "b"), power=al), G(s("dot", "a"), s("odot", "b"), power=al))),),
             "a phase sandwiched by CNOTs splits into two conditionals"),
    ]
    return [replace(r, base=r.name, derived=True) for r in rules]


def all_base_and_derived() -> dict:
    return {r.name: r for r in base_ruleset() + derived_rules()}


# ---------------------------------------------------------------------------
# Flip / flop
# ---------------------------------------------------------------------------

X_MATRIX = np.array([[0, 1], [1, 0]], dtype=complex)
Z_MATRIX = np.array([[1, 0], [0, -1]], dtype=complex)
_CONJ = {"flip_z": ("X", X_MATRIX, {"dot": "odot", "odot": "dot"}),
         "flip_x": ("Z", Z_MATRIX, {"oplus": "ominus", "ominus": "oplus"}),
         "flop": ("H", H_MATRIX, {"dot": "oplus", "oplus": "dot", "odot": "ominus", "ominus": "odot"})}
TRANSFORMS = tuple(_CONJ)


def _conj_name(fname: str, name: str) -> str:
    prefix, suffix = f"{fname}·", f"·{fname}"
    if name.startswith(prefix) and name.endswith(suffix) and len(name) > len(prefix) + len(suffix):
        return name[len(prefix):-len(suffix)]
    return f"{fname}·{name}·{fname}"


def _conj_basis_name(fname: str, name: str) -> str:
    return name[len(fname) + 1:] if name.startswith(fname + "·") else f"{fname}·{name}"


def _conj_occ(t, tname: str):
    fname, f, table = _CONJ[tname]
    if isinstance(t, Sym):
        if t.kind in SYMBOLS:
            return replace(t, kind=table.get(t.kind, t.kind))
        m = f @ H_MATRIX @ f
        if sem.max_norm(m - H_MATRIX) <= 1e-12:
            return t
        return FixedBox(_conj_name(fname, "H"), m, (t.wire,), t.power)
    if isinstance(t, FixedBox):
        fk = np.ones((1, 1), dtype=complex)
        for _ in t.wires:
            fk = np.kron(fk, f)
        m = fk @ t.matrix @ fk
        if sem.max_norm(m - t.matrix) <= 1e-12:
            return t
        if len(t.wires) == 1 and sem.max_norm(m - H_MATRIX) <= 1e-12:
            return Sym("h", t.wires[0], t.power)
        return FixedBox(_conj_name(fname, t.name), m, t.wires, t.power)
    return t


def _explicit_wires(rule: Rule) -> set:
    out: set = set()
    for form in rule.forms:
        for t in form.lhs + form.rhs:
            if isinstance(t, GateT):
                for o in t.occs:
                    if isinstance(o, Sym):
                        out.add(o.wire)
                    elif isinstance(o, FixedBox):
                        out.update(o.wires)
    return out


def _conj_template(t, tname: str, wires: set):
    fname, f, _ = _CONJ[tname]
    if isinstance(t, GateT):
        return replace(t, occs=tuple(_conj_occ(o, tname) for o in t.occs))
    if t.wire not in wires:
        return t
    if t.basis is not None and not isinstance(t.basis, FixedBasis):
        raise RuleError("cannot conjugate a measurement with a metavariable basis")
    m = canonical_basis(f if t.basis is None else f @ t.basis.matrix)
    if sem.max_norm(m - np.eye(2)) <= 1e-12:
        # a diagonal conjugation (Z) leaves computational measurements unchanged
        return replace(t, basis=None)
    name = fname if t.basis is None else _conj_basis_name(fname, t.basis.name)
    return replace(t, basis=FixedBasis(name, m))


def transform(rule: Rule, tname: str) -> Rule:
    if tname not in _CONJ:
        raise RuleError(f"unknown transform {tname!r}")
    wires = _explicit_wires(rule)
    forms = tuple(Form(tuple(_conj_template(t, tname, wires) for t in f.lhs),
                       tuple(_conj_template(t, tname, wires) for t in f.rhs)) for f in rule.forms)
    return replace(rule, forms=forms, word=rule.word + (tname,))


def flip_z(rule: Rule) -> Rule:
    return transform(rule, "flip_z")


def flip_x(rule: Rule) -> Rule:
    return transform(rule, "flip_x")


def flop(rule: Rule) -> Rule:
    return transform(rule, "flop")


def _expr_key(e, names: dict) -> str:
    if e is None:
        return "None"
    if e[0] == "c":
        return f"{e[1]:.12g}"
    if e[0] == "v":
        return names.setdefault(("p", e[1]), f"p{len(names)}")
    return f"({e[0]}{_expr_key(e[1], names)},{_expr_key(e[2], names)})"


def _mat_key(m) -> str:
    r = np.round(np.asarray(m), 9) + 0.0
    return ";".join(f"{z.real:.9f},{z.imag:.9f}" for z in r.reshape(-1))


def _tmpl_key(t, names: dict) -> str:
    def n(kind, v):
        return names.setdefault((kind, v), f"{kind}{len(names)}")

    if isinstance(t, GateT):
        parts = []
        for o in t.occs:
            if isinstance(o, Sym):
                parts.append(f"S{o.kind}@{n('w', o.wire)}^{_expr_key(o.power, names)}")
            elif isinstance(o, FixedBox):
                parts.append(f"B[{_mat_key(o.matrix)}]@{','.join(n('w', w) for w in o.wires)}^{_expr_key(o.power, names)}")
            elif isinstance(o, IdBox):
                parts.append(f"I@{n('m', o.var)}")
            else:
                parts.append(f"A{n('m', o.name)}^{_expr_key(o.power, names)}")
        rest = n("m", t.rest) if t.rest else "-"
        cc = ",".join(n("b", x) for x in t.cc)
        return f"G({'|'.join(parts)};{rest};{_expr_key(t.power, names)};{cc})"
    if isinstance(t.basis, FixedBasis):
        bk = _mat_key(canonical_basis(t.basis.matrix))
    elif t.basis is None:
        bk = "-"
    else:
        bk = n("m", t.basis)
    return f"M({n('w', t.wire)};{n('b', t.bit)};{bk})"


def rule_key(rule: Rule) -> str:
    """Structural identity of a rule up to renaming of its variables."""
    names: dict = {}
    return "//".join("[" + " ".join(_tmpl_key(t, names) for t in f.lhs) + "]=[" +
                     " ".join(_tmpl_key(t, names) for t in f.rhs) + "]" for f in rule.forms)


WORDS = tuple(tuple(w for w, on in zip(TRANSFORMS, bits) if on)
              for bits in itertools.product((0, 1), repeat=3))
WORDS = tuple(sorted(WORDS, key=lambda w: (len(w), [TRANSFORMS.index(x) for x in w])))


def closure(rule: Rule) -> list:
    """Distinct variants of the rule under the group generated by the three maps."""
    out, keys = [], set()
    for word in WORDS:
        r = rule
        for tname in word:
            r = transform(r, tname)
        k = rule_key(r)
        if k not in keys:
            keys.add(k)
            out.append(r)
    return out


_CONTROL_WORDS = {"dot": "", "odot": ".flip_z", "oplus": ".flop", "ominus": ".flop.flip_x"}
CONTROL_VARIANT = {r: {k: r + w for k, w in _CONTROL_WORDS.items()} for r in ("d", "e", "f", "g", "pdm")}
INVOLUTION_VARIANT = {k: "i" + w for k, w in _CONTROL_WORDS.items()}


def get_rule(name: str) -> Rule:
    """Look up "<name>[.flip_z][.flip_x][.flop]"; transforms apply left to right."""
    base, *word = name.split(".")
    rules = all_base_and_derived()
    if base not in rules:
        raise RuleError(f"unknown rule {base!r}")
    r = rules[base]
    for tname in word:
        r = transform(r, tname)
    return r


# ---------------------------------------------------------------------------
# Numerical soundness check
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    rule: str
    samples: int
    max_deviation: float
    passed: bool
    tol: float

    def to_dict(self) -> dict:
        return {"rule": self.rule, "samples": self.samples, "max_deviation": self.max_deviation,
                "passed": self.passed, "tol": self.tol}


_RANDOM_KINDS = ("dot", "odot", "oplus", "ominus", "h")


def _random_fragment(wires: list, rng: np.random.Generator, profile, with_power: bool) -> Fragment:
    power = float(rng.uniform(-2, 2)) if with_power else 1.0
    if profile == "symbolic":
        occ = tuple(((w,), as_atom(SYMBOLS[rng.integers(4)])) for w in wires)
        return Fragment(occ, 1.0)
    if not wires:
        return Fragment((), power)
    if rng.random() < 0.5:
        m = sem.random_unitary(2 ** len(wires), rng)
        return Fragment(((tuple(wires), box("R", m)),), power)
    occ = []
    for w in wires:
        if rng.random() < 0.3:
            occ.append(((w,), box("r", sem.random_unitary(2, rng))))
        else:
            occ.append(((w,), as_atom(_RANDOM_KINDS[rng.integers(5)])))
    return Fragment(tuple(occ), power)


def _form_vars(form: Form) -> dict:
    v = {"wires": [], "powers": [], "frags": {}, "atoms": [], "idboxes": [], "bits": [], "bases": []}

    def addw(x):
        if x not in v["wires"]:
            v["wires"].append(x)

    for t in form.lhs + form.rhs:
        if isinstance(t, GateT):
            for o in t.occs:
                if isinstance(o, Sym):
                    addw(o.wire)
                    v["powers"].extend(expr_vars(o.power))
                elif isinstance(o, FixedBox):
                    for w in o.wires:
                        addw(w)
                    v["powers"].extend(expr_vars(o.power))
                elif isinstance(o, IdBox):
                    v["idboxes"].append(o.var)
                else:
                    v["atoms"].append(o.name)
                    v["powers"].extend(expr_vars(o.power))
            if t.rest:
                v["frags"].setdefault(t.rest, t.power is None)
            v["powers"].extend(expr_vars(t.power))
            v["bits"].extend(t.cc)
        else:
            addw(t.wire)
            v["bits"].append(t.bit)
            if isinstance(t.basis, str):
                v["bases"].append(t.basis)
    for k in ("powers", "atoms", "idboxes", "bits", "bases"):
        v[k] = list(dict.fromkeys(v[k]))
    return v


def sample_binding(rule: Rule, form: int, rng: np.random.Generator, extra: int = 2) -> tuple:
    """A random complete binding for one form; returns (binding, n_wires)."""
    f = rule.forms[form]
    v = _form_vars(f)
    defined = {d.target for d in rule.definitions}
    lhs_vars = _form_vars(Form(f.lhs, ()))
    n = len(v["wires"]) + extra
    order = list(rng.permutation(n))
    b = Binding(form=form)
    for i, w in enumerate(v["wires"]):
        b.wires[w] = int(order[i])
    pool = [int(w) for w in order[len(v["wires"]):]]
    rng.shuffle(pool)
    for p in v["powers"]:
        b.powers[p] = float(rng.uniform(-2, 2))
    for i, bit in enumerate(v["bits"]):
        b.bits[bit] = f"m{i}"
    for name in v["idboxes"]:
        k = 1 + int(rng.integers(min(2, len(pool))))
        ws, pool = pool[:k], pool[k:]
        b.atoms[name] = (tuple(sorted(ws)), box("1", np.eye(2 ** k)))
    for name in v["atoms"]:
        if name in defined and name not in lhs_vars["atoms"]:
            continue
        w = pool.pop(0) if pool else int(rng.integers(n))
        frag = _random_fragment([w], rng, None, False)
        ws, a = frag.occupants[0]
        b.atoms[name] = (ws, a)
    for name in v["bases"]:
        b.bases[name] = box("B", sem.random_unitary(2, rng))
    sampling = rule.sampling or {}
    for name, carries_power in v["frags"].items():
        if name in defined and name not in lhs_vars["frags"]:
            continue
        profile = sampling.get(name)
        if isinstance(profile, tuple) and profile[0] == "within":
            cand = [b.wires[x] for x in profile[1]]
            k = 1 + int(rng.integers(len(cand)))
            ws = sorted(int(x) for x in rng.choice(cand, size=k, replace=False))
            b.frags[name] = _random_fragment(ws, rng, None, carries_power)
            continue
        if profile == "symbolic":
            cand = list(range(n))
            k = 1 + int(rng.integers(min(3, n)))
            ws = sorted(int(x) for x in rng.choice(cand, size=k, replace=False))
            b.frags[name] = _random_fragment(ws, rng, "symbolic", False)
            continue
        k = 1 + int(rng.integers(max(1, min(2, len(pool))))) if pool else 0
        ws = sorted(int(x) for x in rng.choice(pool, size=k, replace=False)) if k else []
        b.frags[name] = _random_fragment(ws, rng, None, carries_power)
    _resolve(rule, b)
    return b, n


def _instance_deviation(rule: Rule, b: Binding, n: int) -> float:
    f = rule.forms[b.form]
    lhs = Circuit(n, tuple(instantiate(f.lhs, b)))
    rhs = Circuit(n, tuple(instantiate(f.rhs, b)))
    return _semantic_gap(lhs, rhs)


def check_rule(rule: Rule, samples: int = 100, seed: int = 42, tol: float = 1e-9) -> CheckReport:
    """Max lhs/rhs semantic deviation over random instantiations of every form."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(samples):
        form = k % len(rule.forms)
        b, n = sample_binding(rule, form, rng)
        worst = max(worst, _instance_deviation(rule, b, n))
    return CheckReport(rule.full_name, samples, worst, worst <= tol, tol)
