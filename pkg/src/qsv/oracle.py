"""Explicit-matrix reference simulation, used only to check the kernels.

Gate embeddings are built column by column from the definition of a
controlled multi-target unitary, independently of the kernels' block views.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .errors import OracleScaleError
from .gates import Gate
from .statevector import StateVector

ORACLE_MAX_QUBITS = 12


def embed(gate: Gate, n: int) -> sp.csr_matrix:
    """The full ``2**n x 2**n`` matrix of ``gate`` acting on an n-qubit register."""
    dim = 1 << n
    cols = np.arange(dim)
    if gate.is_barrier:
        return sp.identity(dim, dtype=np.complex128, format="csr")
    cmask = sum(1 << c for c in gate.controls)
    active = (cols & cmask) == cmask
    tmask = sum(1 << t for t in gate.targets)
    # column sub-index: target bits of the column, packed in target-list order
    sub = np.zeros(dim, dtype=np.int64)
    for p, t in enumerate(gate.targets):
        sub |= ((cols >> t) & 1) << p
    rows_l, cols_l, vals_l = [cols[~active]], [cols[~active]], [np.ones((~active).sum(), complex)]
    acols = cols[active]
    asub = sub[active]
    for r in range(1 << gate.k):
        rows = acols & ~tmask
        for p, t in enumerate(gate.targets):
            rows = rows | (((r >> p) & 1) << t)
        rows_l.append(rows)
        cols_l.append(acols)
        vals_l.append(gate.matrix[r, asub])
    m = sp.coo_matrix((np.concatenate(vals_l), (np.concatenate(rows_l), np.concatenate(cols_l))),
                      shape=(dim, dim))
    return m.tocsr()


def kron_embed(u: np.ndarray, k: int, n: int) -> np.ndarray:
    """Dense ``I^(n-k-1) (x) U (x) I^k`` for a single-qubit ``u`` on qubit ``k``."""
    out = np.eye(1 << (n - k - 1), dtype=np.complex128)
    out = np.kron(out, u)
    return np.kron(out, np.eye(1 << k, dtype=np.complex128)) if k else out


def circuit_unitary(circuit) -> np.ndarray:
    """Dense product of all embedded gate matrices in program order (small n only)."""
    if circuit.n > 10:
        raise OracleScaleError(f"dense unitary limited to 10 qubits, got {circuit.n}")
    u = np.eye(1 << circuit.n, dtype=np.complex128)
    for g in circuit.gates:
        u = embed(g, circuit.n) @ u
    return np.asarray(u)


def dense_oracle(circuit, state: StateVector | None = None) -> StateVector:
    """Return ``U_total @ state`` with ``U_total`` the product of embedded gates.

    The product is associated to the right, one embedded gate at a time.
    """
    if circuit.n > ORACLE_MAX_QUBITS:
        raise OracleScaleError(f"dense oracle limited to {ORACLE_MAX_QUBITS} qubits, got {circuit.n}")
    psi = StateVector.zero(circuit.n).amps if state is None else state.amps
    if state is not None and state.n != circuit.n:
        raise OracleScaleError(f"state has {state.n} qubits, circuit {circuit.n}")
    psi = np.array(psi, dtype=np.complex128)
    for g in circuit.gates:
        psi = embed(g, circuit.n) @ psi
    return StateVector(circuit.n, psi)

