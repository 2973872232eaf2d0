"""Distributed full-amplitude quantum circuit simulation on numpy."""
from .circuit import Circuit, gen_hea, gen_qaoa, gen_qft, parse_generator, random_circuit
from .dagc import build_dag, contract, gate_cost
from .errors import (DistributedError, HandshakeError, OracleScaleError, ParameterError, QasmError,
                     QsvError, RemoteAbort, TransportError)
from .gates import Gate
from .oracle import dense_oracle
from .qasm import emit_qasm, load_qasm, parse_qasm
from .statevector import StateVector, apply_gate, run_local

__version__ = "0.1.0"

__all__ = [
    "Circuit", "DistributedError", "Gate", "HandshakeError", "OracleScaleError", "ParameterError",
    "QasmError", "QsvError", "RemoteAbort", "StateVector", "TransportError", "apply_gate",
    "build_dag", "contract", "dense_oracle", "emit_qasm", "gate_cost", "gen_hea", "gen_qaoa",
    "gen_qft", "load_qasm", "parse_generator", "parse_qasm", "random_circuit", "run_local",
]
