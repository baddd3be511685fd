"""
Diagram data model: atoms, gates, measurements, circuits and their JSON form.

Contains:
    - Atom: one occupant of a gate (symbol, Hadamard, or boxed unitary)
    - Gate / Measurement / Discard: circuit elements
    - Circuit, Context: the diagram and its fixed-input preparations
    - validate(), adjoint(), normalize_powers()
    - parse() / serialize() and their dict-level counterparts

Conventions:
    - Wire 0 is the top wire and the most significant tensor factor.
    - A Box spanning several wires lists them in ascending order; its matrix
      uses that order for its tensor factors.
    - Every atom may carry its own number; the effective exponent of a gate is
      gate.power times the product of its atom powers ("numbers multiply
      along vertical lines").
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np

SYMBOLS = ("dot", "odot", "oplus", "ominus")
GLYPH = {"dot": "•", "odot": "∘", "oplus": "⊕", "ominus": "⊖", "h": "H"}

MATRIX_EQ_TOL = 1e-10
POWER_EQ_TOL = 1e-12
UNITARY_TOL = 1e-10

SQRT_HALF = 1.0 / math.sqrt(2.0)
H_MATRIX = np.array([[SQRT_HALF, SQRT_HALF], [SQRT_HALF, -SQRT_HALF]], dtype=complex)


class IRError(ValueError):
    """Structural misuse of the IR (bad wires, non-invertible adjoint, ...)."""


class ParseError(ValueError):
    """Malformed circuit/context document; `path` names the offending field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.message = message
        self.path = path


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Atom:
    """A gate occupant. Symbols and Hadamard span one wire; a Box spans 2^k dims."""

    kind: str
    name: str = ""
    matrix: np.ndarray | None = None
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in SYMBOLS and self.kind not in ("h", "box"):
            raise IRError(f"unknown atom kind {self.kind!r}")
        if self.kind == "box":
            if self.matrix is None:
                raise IRError("box atom needs a matrix")
            m = np.array(self.matrix, dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2 or m.shape[0] & (m.shape[0] - 1):
                raise IRError(f"box {self.name!r}: matrix must be square of dimension 2^k, got {m.shape}")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)
        elif self.matrix is not None:
            raise IRError(f"{self.kind} atom takes no matrix")
        object.__setattr__(self, "power", float(self.power))

    @property
    def arity(self) -> int:
        if self.kind == "box":
            return int(self.matrix.shape[0]).bit_length() - 1
        return 1

    @property
    def is_symbol(self) -> bool:
        return self.kind in SYMBOLS

    def with_power(self, power: float) -> "Atom":
        return Atom(self.kind, self.name, self.matrix, power)

    def label(self) -> str:
        base = self.name if self.kind == "box" else GLYPH[self.kind]
        return base if _close(self.power, 1.0) else f"{base}^{_fmt(self.power)}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Atom) or self.kind != other.kind:
            return False
        if not _close(self.power, other.power):
            return False
        if self.kind == "box":
            if self.matrix.shape != other.matrix.shape:
                return False
            return float(np.abs(self.matrix - other.matrix).max()) <= MATRIX_EQ_TOL
        return True

    def __hash__(self) -> int:
        shape = None if self.matrix is None else self.matrix.shape
        return hash((self.kind, shape))

    def __repr__(self) -> str:
        return f"Atom({self.label()})"


DOT = Atom("dot")
ODOT = Atom("odot")
OPLUS = Atom("oplus")
OMINUS = Atom("ominus")
HAD = Atom("h")
_BY_NAME = {"dot": DOT, "odot": ODOT, "oplus": OPLUS, "ominus": OMINUS, "h": HAD}


def box(name: str, matrix) -> Atom:
    return Atom("box", name, np.asarray(matrix, dtype=complex))


def identity_box(k: int = 1) -> Atom:
    return box("1", np.eye(2 ** k))


def as_atom(a: Atom | str) -> Atom:
    if isinstance(a, Atom):
        return a
    try:
        return _BY_NAME[a]
    except KeyError:
        raise IRError(f"unknown symbol {a!r}") from None


def permute_qubits(matrix: np.ndarray, perm: Iterable[int]) -> np.ndarray:
    """Reorder tensor factors: factor j of the result is factor perm[j] of `matrix`."""
    perm = list(perm)
    k = len(perm)
    t = np.asarray(matrix).reshape((2,) * (2 * k))
    t = t.transpose(perm + [k + p for p in perm])
    return t.reshape(2 ** k, 2 ** k)


# ---------------------------------------------------------------------------
# Elements
# ---------------------------------------------------------------------------

Occupant = tuple  # (wires: tuple[int, ...], atom: Atom)


def _canonical_occupant(wires, atom: Atom) -> Occupant:
    if isinstance(wires, (int, np.integer)):
        wires = (int(wires),)
    wires = tuple(int(w) for w in wires)
    atom = as_atom(atom)
    if len(wires) != atom.arity:
        raise IRError(f"atom {atom.label()} spans {atom.arity} wire(s) but was placed on {wires}")
    if len(set(wires)) != len(wires):
        raise IRError(f"atom {atom.label()} placed on repeated wires {wires}")
    if atom.kind == "box" and list(wires) != sorted(wires):
        order = sorted(range(len(wires)), key=lambda i: wires[i])
        atom = Atom("box", atom.name, permute_qubits(atom.matrix, order), atom.power)
        wires = tuple(sorted(wires))
    return (wires, atom)


@dataclass(frozen=True, eq=False)
class Gate:
    """Occupants joined by one vertical line, a real power, and classical controls."""

    occupants: tuple
    power: float = 1.0
    cc: frozenset = frozenset()

    def __post_init__(self):
        occ = [_canonical_occupant(w, a) for w, a in self.occupants]
        occ.sort(key=lambda o: o[0])
        object.__setattr__(self, "occupants", tuple(occ))
        object.__setattr__(self, "power", float(self.power))
        object.__setattr__(self, "cc", frozenset(str(b) for b in self.cc))

    @property
    def wires(self) -> tuple:
        return tuple(sorted(w for ws, _ in self.occupants for w in ws))

    @property
    def atoms(self) -> tuple:
        return tuple(a for _, a in self.occupants)

    @property
    def total_power(self) -> float:
        p = self.power
        for a in self.atoms:
            p *= a.power
        return p

    @property
    def is_symbolic(self) -> bool:
        return bool(self.occupants) and all(a.is_symbol for a in self.atoms)

    def atom_at(self, wire: int):
        for ws, a in self.occupants:
            if wire in ws:
                return ws, a
        return None

    def replace(self, occupants=None, power=None, cc=None) -> "Gate":
        return Gate(self.occupants if occupants is None else tuple(occupants),
                    self.power if power is None else power,
                    self.cc if cc is None else cc)

    def label(self) -> str:
        body = ",".join(f"{'/'.join(map(str, ws))}{a.label()}" for ws, a in self.occupants)
        s = "{" + body + "}"
        if not _close(self.power, 1.0):
            s += f"^{_fmt(self.power)}"
        if self.cc:
            s += " if " + "&".join(sorted(self.cc))
        return s

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, Gate) and self.cc == other.cc
                and _close(self.power, other.power)
                and len(self.occupants) == len(other.occupants)
                and all(w1 == w2 and a1 == a2 for (w1, a1), (w2, a2) in zip(self.occupants, other.occupants)))

    def __hash__(self) -> int:
        return hash((tuple(w for w, _ in self.occupants), self.cc))

    def __repr__(self) -> str:
        return f"Gate({self.label()})"


@dataclass(frozen=True, eq=False)
class Measurement:
    wire: int
    bit: str
    basis: Atom | None = None

    def __post_init__(self):
        object.__setattr__(self, "wire", int(self.wire))
        object.__setattr__(self, "bit", str(self.bit))
        if self.basis is not None and (self.basis.kind != "box" or self.basis.arity != 1):
            raise IRError("measurement basis must be a one-wire box")

    @property
    def wires(self) -> tuple:
        return (self.wire,)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Measurement) or (self.wire, self.bit) != (other.wire, other.bit):
            return False
        if self.basis is None or other.basis is None:
            return self.basis is None and other.basis is None
        return self.basis == other.basis

    def __hash__(self) -> int:
        return hash((self.wire, self.bit))

    def __repr__(self) -> str:
        b = "" if self.basis is None else f" in {self.basis.name}"
        return f"Measure({self.wire}->{self.bit}{b})"


@dataclass(frozen=True)
class Discard:
    wire: int

    @property
    def wires(self) -> tuple:
        return (self.wire,)


Element = Gate | Measurement | Discard


@dataclass(frozen=True)
class Circuit:
    n_wires: int
    elements: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "n_wires", int(self.n_wires))
        object.__setattr__(self, "elements", tuple(self.elements))

    @property
    def classical_bits(self) -> frozenset:
        return frozenset(e.bit for e in self.elements if isinstance(e, Measurement))

    @property
    def gates(self) -> list:
        return [e for e in self.elements if isinstance(e, Gate)]

    @property
    def has_measurements(self) -> bool:
        return any(isinstance(e, (Measurement, Discard)) for e in self.elements)

    @property
    def has_classical_controls(self) -> bool:
        return any(isinstance(e, Gate) and e.cc for e in self.elements)

    def with_elements(self, elements: Iterable) -> "Circuit":
        return Circuit(self.n_wires, tuple(elements))

    def __add__(self, other: "Circuit") -> "Circuit":
        """Sequential composition; the narrower circuit is padded with idle wires."""
        return Circuit(max(self.n_wires, other.n_wires), self.elements + other.elements)

    def __len__(self) -> int:
        return len(self.elements)


@dataclass(frozen=True)
class Context:
    """Fixed-input preparations: wire -> unit 2-vector. Other wires are free."""

    preparations: Mapping[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        preps = {}
        for w, v in dict(self.preparations).items():
            vec = np.asarray(STATE_LABELS.get(v, v) if isinstance(v, str) else v, dtype=complex).reshape(-1)
            if vec.shape != (2,):
                raise IRError(f"preparation on wire {w} must be a 2-vector")
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise IRError(f"preparation on wire {w} is not a unit vector")
            vec.setflags(write=False)
            preps[int(w)] = vec
        object.__setattr__(self, "preparations", dict(sorted(preps.items())))

    def free_wires(self, n_wires: int) -> list:
        return [w for w in range(n_wires) if w not in self.preparations]


STATE_LABELS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([SQRT_HALF, SQRT_HALF], dtype=complex),
    "-": np.array([SQRT_HALF, -SQRT_HALF], dtype=complex),
}


# ---------------------------------------------------------------------------
# Convenience constructors
# ---------------------------------------------------------------------------

def gate(occ: Mapping, power: float = 1.0, cc: Iterable[str] = ()) -> Gate:
    """Build a gate from {wire: atom-or-symbol-name} with tuple keys for boxes.

    >>> gate({0: "dot", 1: "oplus"}).label()
    '{0•,1⊕}'
    """
    return Gate(tuple((k, as_atom(v)) for k, v in occ.items()), power, frozenset(cc))


def circuit(n_wires: int, *elements: Element) -> Circuit:
    return Circuit(n_wires, elements)


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Diagnostic:
    index: int
    invariant: str
    message: str

    def to_dict(self) -> dict:
        return {"index": self.index, "invariant": self.invariant, "message": self.message}


def validate(c: Circuit) -> list:
    """Check the structural invariants; one Diagnostic per violation."""
    diags: list[Diagnostic] = []
    if c.n_wires < 1:
        diags.append(Diagnostic(-1, "n_wires positive", f"n_wires={c.n_wires}"))
    closed: dict[int, int] = {}
    produced: set[str] = set()
    for i, e in enumerate(c.elements):
        for w in e.wires:
            if not 0 <= w < c.n_wires:
                diags.append(Diagnostic(i, "wire out of range", f"wire {w} not in [0,{c.n_wires})"))
        if isinstance(e, Gate):
            if not e.occupants:
                diags.append(Diagnostic(i, "non-empty occupants", "gate has no occupants"))
            seen: list[int] = []
            for ws, a in e.occupants:
                if set(ws) & set(seen):
                    diags.append(Diagnostic(i, "disjoint occupants", f"wire(s) {sorted(set(ws) & set(seen))} occupied twice"))
                seen.extend(ws)
                if a.kind == "box":
                    res = float(np.abs(a.matrix.conj().T @ a.matrix - np.eye(a.matrix.shape[0])).max())
                    if res > UNITARY_TOL:
                        diags.append(Diagnostic(i, "box unitary", f"box {a.name!r} residual {res:.3g}"))
                if not math.isfinite(a.power):
                    diags.append(Diagnostic(i, "finite power", f"atom {a.label()} power not finite"))
            if not math.isfinite(e.power):
                diags.append(Diagnostic(i, "finite power", "gate power not finite"))
            for w in seen:
                if w in closed:
                    diags.append(Diagnostic(i, "no gate after measurement", f"wire {w} closed at element {closed[w]}"))
            for b in sorted(e.cc):
                if b not in produced:
                    diags.append(Diagnostic(i, "control precedes measurement", f"bit {b!r} not produced by an earlier measurement"))
        else:
            if e.wire in closed:
                diags.append(Diagnostic(i, "no gate after measurement", f"wire {e.wire} already closed at element {closed[e.wire]}"))
            if isinstance(e, Measurement):
                if e.bit in produced:
                    diags.append(Diagnostic(i, "unique bits", f"bit {e.bit!r} measured twice"))
                produced.add(e.bit)
                if e.basis is not None:
                    res = float(np.abs(e.basis.matrix.conj().T @ e.basis.matrix - np.eye(2)).max())
                    if res > UNITARY_TOL:
                        diags.append(Diagnostic(i, "box unitary", f"basis residual {res:.3g}"))
            closed.setdefault(e.wire, i)
    return diags


# ---------------------------------------------------------------------------
# Adjoint and power normalization
# ---------------------------------------------------------------------------

def _dagger_name(name: str) -> str:
    return name[:-1] if name.endswith("†") else name + "†"


def adjoint(c: Circuit) -> Circuit:
    """Mirror image: reverse the elements and negate every number.

    A gate that is a lone Box with power ±1 is shown as the daggered box at
    the same power instead of a negated power: (U^s)† = (U†)^s for s = ±1,
    the daggered form keeps the mirror readable, and the map stays an
    involution.
    """
    out = []
    for i, e in enumerate(reversed(c.elements)):
        if not isinstance(e, Gate):
            raise IRError(f"adjoint: element {len(c.elements) - 1 - i} is a measurement/discard (non-invertible)")
        if e.cc:
            raise IRError("adjoint: classically controlled gates are not invertible in isolation")
        if len(e.occupants) == 1 and e.atoms[0].kind == "box" and _close(abs(e.total_power), 1.0):
            (ws, a), = e.occupants
            dag = box(_dagger_name(a.name), a.matrix.conj().T).with_power(a.power)
            out.append(e.replace(occupants=[(ws, dag)]))
        else:
            out.append(e.replace(power=-e.power))
    return c.with_elements(out)


def fold_atom_powers(g: Gate) -> Gate:
    """Move all atom numbers into the gate power (rule n*)."""
    return g.replace(occupants=[(ws, a.with_power(1.0)) for ws, a in g.occupants], power=g.total_power)


def reduce_mod2(p: float) -> float:
    r = math.fmod(p, 2.0)
    if r < 0:
        r += 2.0
    if r < POWER_EQ_TOL or 2.0 - r < POWER_EQ_TOL:
        return 0.0
    return r


def normalize_powers(c: Circuit) -> Circuit:
    """Reduce all-symbol gate powers into [0,2); drop those that reduce to 0."""
    out = []
    for e in c.elements:
        if isinstance(e, Gate) and e.is_symbolic:
            g = fold_atom_powers(e)
            p = reduce_mod2(g.power)
            if p == 0.0:
                continue
            out.append(g.replace(power=p))
        else:
            out.append(e)
    return c.with_elements(out)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def matrix_from_json(data: Any, path: str) -> np.ndarray:
    if not isinstance(data, list) or not data:
        raise ParseError("matrix must be a non-empty list of rows", path)
    n = len(data)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(f"row {i} must have {n} entries", f"{path}[{i}]")
        for j, z in enumerate(row):
            if isinstance(z, (int, float)) and not isinstance(z, bool):
                out[i, j] = float(z)
            elif isinstance(z, list) and len(z) == 2 and all(isinstance(t, (int, float)) for t in z):
                out[i, j] = complex(z[0], z[1])
            else:
                raise ParseError("entry must be [re, im]", f"{path}[{i}][{j}]")
    return out


def _box_to_json(ws: tuple, a: Atom) -> dict:
    d: dict[str, Any] = {"box": {"name": a.name, "wires": list(ws), "matrix": matrix_to_json(a.matrix)}}
    if not _close(a.power, 1.0):
        d["power"] = a.power
    return d


def _atom_to_json(ws: tuple, a: Atom):
    if a.kind == "box":
        return _box_to_json(ws, a)
    if _close(a.power, 1.0):
        return a.kind
    return {"symbol": a.kind, "power": a.power}


def element_to_dict(e: Element) -> dict:
    if isinstance(e, Gate):
        return {"type": "gate", "power": e.power, "cc": sorted(e.cc),
                "occupants": {str(ws[0]): _atom_to_json(ws, a) for ws, a in e.occupants}}
    if isinstance(e, Measurement):
        d: dict[str, Any] = {"type": "measure", "wire": e.wire, "bit": e.bit}
        if e.basis is not None:
            d["basis"] = _box_to_json((e.wire,), e.basis)
        return d
    return {"type": "discard", "wire": e.wire}


def to_dict(c: Circuit) -> dict:
    return {"n_wires": c.n_wires, "elements": [element_to_dict(e) for e in c.elements]}


def _num(v: Any, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError("expected a number", path)
    return float(v)


def _int(v: Any, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError("expected an integer", path)
    return v


def _parse_box(d: Any, path: str):
    if not isinstance(d, dict) or "box" not in d:
        raise ParseError("expected {'box': {...}}", path)
    b = d["box"]
    if not isinstance(b, dict):
        raise ParseError("box must be an object", f"{path}.box")
    name = b.get("name", "U")
    if not isinstance(name, str):
        raise ParseError("box name must be a string", f"{path}.box.name")
    bpath = f"{path}.box[{name}]"
    if "matrix" not in b:
        raise ParseError("box needs a matrix", bpath)
    m = matrix_from_json(b["matrix"], f"{bpath}.matrix")
    k = m.shape[0].bit_length() - 1
    if m.shape[0] != 2 ** k or k < 1:
        raise ParseError(f"box {name!r} matrix dimension {m.shape[0]} is not a power of two", f"{bpath}.matrix")
    wires = b.get("wires")
    if not isinstance(wires, list) or not all(isinstance(w, int) and not isinstance(w, bool) for w in wires):
        raise ParseError("box wires must be a list of integers", f"{bpath}.wires")
    if len(wires) != k:
        raise ParseError(f"box {name!r} spans {k} wire(s) but lists {len(wires)}", f"{bpath}.wires")
    power = _num(d.get("power", 1.0), f"{path}.power")
    return tuple(wires), Atom("box", name, m, power)


def element_from_dict(d: Any, path: str) -> Element:
    if not isinstance(d, dict):
        raise ParseError("element must be an object", path)
    t = d.get("type")
    try:
        if t == "gate":
            occ_d = d.get("occupants")
            if not isinstance(occ_d, dict) or not occ_d:
                raise ParseError("gate needs a non-empty occupants object", f"{path}.occupants")
            occs = []
            for key, v in occ_d.items():
                opath = f"{path}.occupants.{key}"
                try:
                    w = int(key)
                except ValueError:
                    raise ParseError("occupant key must be a wire index", opath) from None
                if isinstance(v, str):
                    if v not in _BY_NAME:
                        raise ParseError(f"unknown symbol {v!r}", opath)
                    occs.append(((w,), _BY_NAME[v]))
                elif isinstance(v, dict) and "symbol" in v:
                    if v["symbol"] not in _BY_NAME:
                        raise ParseError(f"unknown symbol {v['symbol']!r}", f"{opath}.symbol")
                    occs.append(((w,), _BY_NAME[v["symbol"]].with_power(_num(v.get("power", 1.0), f"{opath}.power"))))
                else:
                    ws, a = _parse_box(v, opath)
                    if w not in ws:
                        raise ParseError(f"occupant key {w} is not among the box wires {list(ws)}", opath)
                    occs.append((ws, a))
            cc = d.get("cc", [])
            if not isinstance(cc, list) or not all(isinstance(b, str) for b in cc):
                raise ParseError("cc must be a list of bit names", f"{path}.cc")
            return Gate(tuple(occs), _num(d.get("power", 1.0), f"{path}.power"), frozenset(cc))
        if t == "measure":
            basis = None
            if d.get("basis") is not None:
                _, basis = _parse_box(d["basis"], f"{path}.basis")
            bit = d.get("bit")
            if not isinstance(bit, str):
                raise ParseError("measurement bit must be a string", f"{path}.bit")
            return Measurement(_int(d.get("wire"), f"{path}.wire"), bit, basis)
        if t == "discard":
            return Discard(_int(d.get("wire"), f"{path}.wire"))
    except IRError as exc:
        raise ParseError(str(exc), path) from None
    raise ParseError(f"unknown element type {t!r}", f"{path}.type")


def from_dict(d: Any, path: str = "$", check: bool = True) -> Circuit:
    if not isinstance(d, dict):
        raise ParseError("circuit document must be an object", path)
    n = _int(d.get("n_wires"), f"{path}.n_wires")
    els = d.get("elements", [])
    if not isinstance(els, list):
        raise ParseError("elements must be a list", f"{path}.elements")
    c = Circuit(n, tuple(element_from_dict(e, f"{path}.elements[{i}]") for i, e in enumerate(els)))
    if check:
        diags = validate(c)
        if diags:
            first = diags[0]
            raise ParseError(f"{first.invariant}: {first.message}", f"{path}.elements[{first.index}]")
    return c


def serialize(c: Circuit) -> bytes:
    return json.dumps(to_dict(c), ensure_ascii=False).encode("utf-8")


def parse(text: bytes | str) -> Circuit:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "$") from None
    return from_dict(data)


def context_to_dict(ctx: Context) -> dict:
    return {"preparations": {str(w): [[float(z.real), float(z.imag)] for z in v] for w, v in ctx.preparations.items()}}


def context_from_dict(d: Any, path: str = "$") -> Context:
    if not isinstance(d, dict) or not isinstance(d.get("preparations", {}), dict):
        raise ParseError("context must be {'preparations': {wire: state}}", path)
    preps = {}
    for key, v in d.get("preparations", {}).items():
        p = f"{path}.preparations.{key}"
        try:
            w = int(key)
        except ValueError:
            raise ParseError("preparation key must be a wire index", p) from None
        if isinstance(v, str):
            if v not in STATE_LABELS:
                raise ParseError(f"unknown state label {v!r}", p)
            preps[w] = STATE_LABELS[v]
        elif isinstance(v, list) and len(v) == 2:
            try:
                preps[w] = np.array([complex(*z) if isinstance(z, list) else complex(z) for z in v])
            except TypeError:
                raise ParseError("state entries must be [re, im]", p) from None
        else:
            raise ParseError("state must be a label or a 2-vector", p)
    try:
        return Context(preps)
    except IRError as exc:
        raise ParseError(str(exc), path) from None


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _close(a: float, b: float, tol: float = POWER_EQ_TOL) -> bool:
    return abs(a - b) <= tol


def _fmt(p: float) -> str:
    return f"{p:.6g}"
