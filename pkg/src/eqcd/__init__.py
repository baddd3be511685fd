"""
Extended quantum circuit diagrams: gates as exponentials of tensor-product
Hamiltonians, a rewrite-rule engine closed under flips and flops, proof-script
replay, and control analysis for two-qubit gates.

Modules:
    ir          circuit IR, validation and JSON serialization
    semantics   unitary, contextual and channel semantics; equivalence oracle
    rules       rule templates, matching, rewriting and soundness checks
    prover      proof scripts, the verifier, simplifier and measurement deferral
    control     partial eigenbases, classification, interpretations, diagonalization
    catalog     named circuits of the worked examples
    cli         the `eqcd` command
"""
from .ir import Atom, Circuit, Context, Discard, Gate, Measurement, box, circuit, gate, parse, serialize
from .semantics import circuit_channel, circuit_unitary, equivalent

__version__ = "0.1.0"

__all__ = [
    "Atom", "Circuit", "Context", "Discard", "Gate", "Measurement", "box", "circuit", "gate", "parse",
    "serialize", "circuit_channel", "circuit_unitary", "equivalent", "__version__",
]
