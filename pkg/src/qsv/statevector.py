"""Dense statevector storage and single-process gate kernels.

Qubit ``q`` is bit ``q`` of the amplitude index (qubit 0 = least significant).

Every kernel funnels its arithmetic through :func:`combine`, which only ever
operates on freshly copied contiguous blocks.  numpy picks different SIMD code
paths for strided and contiguous operands, so this is what makes the naive,
grouped, multi-worker, staggered and distributed paths agree bit for bit.
"""
from __future__ import annotations

import contextlib
import math
from concurrent.futures import Executor, ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .gates import DEFAULT_FUSION_CAP, Gate

# below this many elements per block a gate is not split across workers
MIN_PART = 1 << 12

_fault = False


class StateVector:
    """Owner of ``2**n`` complex128 amplitudes."""

    __slots__ = ("n", "amps")

    def __init__(self, n: int, amps: np.ndarray | None = None):
        if n < 1:
            raise ParameterError(f"qubit count must be >= 1, got {n}")
        self.n = int(n)
        if amps is None:
            amps = np.zeros(1 << n, dtype=np.complex128)
            amps[0] = 1.0
        else:
            amps = np.ascontiguousarray(amps, dtype=np.complex128)
            if amps.shape != (1 << n,):
                raise ParameterError(f"expected {1 << n} amplitudes, got shape {amps.shape}")
        self.amps = amps

    @classmethod
    def zero(cls, n: int) -> "StateVector":
        return cls(n)

    @classmethod
    def from_array(cls, amps) -> "StateVector":
        amps = np.asarray(amps, dtype=np.complex128)
        n = int(amps.size).bit_length() - 1
        if amps.ndim != 1 or amps.size != 1 << n:
            raise ParameterError("amplitude array length must be a power of two")
        return cls(n, amps.copy())

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "StateVector":
        v = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
        return cls(n, v / np.linalg.norm(v))

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.amps.copy())

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def __len__(self):
        return self.amps.size

    def __array__(self, dtype=None, copy=None):
        return self.amps if dtype is None else self.amps.astype(dtype)

    def __repr__(self):
        return f"StateVector(n={self.n})"


@contextlib.contextmanager
def inject_sign_fault():
    """Test hook: flip the sign of one matrix entry inside every kernel."""
    global _fault
    _fault = True
    try:
        yield
    finally:
        _fault = False


def combine(m: np.ndarray, blocks: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Return ``M @ (blocks)`` row by row, summing columns left to right.

    For a 2x2 matrix this is exactly the pair update
    ``a' = u00*a + u01*b``, ``b' = u10*a + u11*b``.
    """
    dim = len(blocks)
    out = []
    for r in range(dim):
        u = m[r, 0]
        if _fault and r == 0 and dim > 1:
            u = -u
        acc = u * blocks[0]
        for c in range(1, dim):
            acc += m[r, c] * blocks[c]
        out.append(acc)
    return out


def split_view(arr: np.ndarray, nbits: int, bits: Sequence[int]) -> tuple[np.ndarray, dict[int, int]]:
    """Reshape a flat ``2**nbits`` array so each listed bit gets its own size-2 axis.

    Returns the view and a map ``bit -> axis``.  Axis 0 is the group axis of the
    grouped traversal: it enumerates the blocks of ``2**(max(bits)+1)``
    consecutive amplitudes.
    """
    shape: list[int] = []
    axes: dict[int, int] = {}
    prev = nbits
    for b in sorted(bits, reverse=True):
        if not 0 <= b < prev:
            raise ParameterError(f"bit {b} out of range for {nbits}-bit index")
        shape.append(1 << (prev - b - 1))
        axes[b] = len(shape)
        shape.append(2)
        prev = b
    shape.append(1 << prev)
    return arr.reshape(shape), axes


def block_views(arr: np.ndarray, nbits: int, targets: Sequence[int],
                controls: Sequence[int] = ()) -> list[np.ndarray]:
    """Views of the ``2**k`` amplitude blocks a gate mixes, control bits fixed to 1.

    Block ``r`` holds the amplitudes whose target bits spell ``r`` (bit ``p`` of
    ``r`` is the value of ``targets[p]``).  All blocks share one shape.
    """
    view, axes = split_view(arr, nbits, list(targets) + list(controls))
    base: list = [slice(None)] * view.ndim
    for c in controls:
        base[axes[c]] = 1
    blocks = []
    for r in range(1 << len(targets)):
        idx = list(base)
        for p, t in enumerate(targets):
            idx[axes[t]] = (r >> p) & 1
        blocks.append(view[tuple(idx)])
    return blocks


def _partitions(shape: tuple[int, ...], parts: int) -> list[tuple]:
    """Split block index space into ``parts`` disjoint slabs along its longest axis."""
    total = math.prod(shape)
    parts = max(1, min(parts, total // MIN_PART))
    if parts == 1:
        return [()]
    axis = int(np.argmax(shape))
    edges = np.linspace(0, shape[axis], min(parts, shape[axis]) + 1).astype(int)
    lead = (slice(None),) * axis
    return [lead + (slice(lo, hi),) for lo, hi in zip(edges[:-1], edges[1:]) if hi > lo]


def _update(blocks: list[np.ndarray], m: np.ndarray, sl: tuple) -> None:
    src = [b[sl].copy() for b in blocks]
    for b, new in zip(blocks, combine(m, src)):
        b[sl] = new


def apply_matrix(arr: np.ndarray, nbits: int, targets: Sequence[int], controls: Sequence[int],
                 m: np.ndarray, pool: Executor | None = None, parts: int = 1) -> None:
    """Apply ``m`` in place to a flat amplitude array indexed by ``nbits`` bits."""
    if not arr.flags.c_contiguous:
        raise ParameterError("amplitude array must be C-contiguous")
    blocks = block_views(arr, nbits, targets, controls)
    slabs = _partitions(blocks[0].shape, parts if pool is not None else 1)
    if len(slabs) == 1:
        _update(blocks, m, slabs[0])
        return
    for f in [pool.submit(_update, blocks, m, sl) for sl in slabs]:
        f.result()


def traversal_pairs(n: int, target: int, control: int | None = None):
    """Instrumented replay of the grouped traversal over index space.

    Runs the same view construction as the kernels on ``arange(2**n)`` and
    returns ``(groups, i0, i1)``: number of groups of size ``2**(t+1)`` and the
    paired indices in visiting order.
    """
    idx = np.arange(1 << n)
    controls = () if control is None else (control,)
    b0, b1 = block_views(idx, n, (target,), controls)
    groups = split_view(idx, n, (target,))[0].shape[0]
    return groups, b0.ravel().copy(), b1.ravel().copy()


def _check(state: StateVector, gate: Gate, k: int | None = None, n_controls: int | None = None):
    if gate.is_barrier:
        raise ParameterError("barrier has no action")
    for q in gate.qubits:
        if q >= state.n:
            raise ParameterError(f"qubit {q} out of range for {state.n}-qubit state")
    if k is not None and gate.k != k:
        raise ParameterError(f"expected a {k}-target gate, got {gate!r}")
    if n_controls is not None and len(gate.controls) != n_controls:
        raise ParameterError(f"expected {n_controls} control(s), got {gate!r}")


def apply_single_naive(state: StateVector, gate: Gate) -> StateVector:
    """Full-index scan with mask test per index (reference traversal)."""
    _check(state, gate, k=1, n_controls=0)
    mask = 1 << gate.targets[0]
    idx = np.arange(len(state))
    i0 = idx[(idx & mask) == 0]
    i1 = i0 + mask
    a, b = combine(gate.matrix, [state.amps[i0], state.amps[i1]])
    state.amps[i0] = a
    state.amps[i1] = b
    return state


def apply_controlled_naive(state: StateVector, gate: Gate) -> StateVector:
    """Full-index scan skipping indices whose control bit is clear."""
    _check(state, gate, k=1, n_controls=1)
    mc, mt = 1 << gate.controls[0], 1 << gate.targets[0]
    idx = np.arange(len(state))
    i0 = idx[((idx & mc) != 0) & ((idx & mt) == 0)]
    i1 = i0 + mt
    a, b = combine(gate.matrix, [state.amps[i0], state.amps[i1]])
    state.amps[i0] = a
    state.amps[i1] = b
    return state


def apply_single_grouped(state: StateVector, gate: Gate, pool: Executor | None = None,
                         parts: int = 1) -> StateVector:
    """Groups of ``2**(t+1)`` amplitudes, visiting only the first half of each."""
    _check(state, gate, k=1, n_controls=0)
    apply_matrix(state.amps, state.n, gate.targets, (), gate.matrix, pool, parts)
    return state


def apply_controlled(state: StateVector, gate: Gate, pool: Executor | None = None,
                     parts: int = 1) -> StateVector:
    """Single-control gate; only pairs with the control bit set are touched.

    Works for either ordering of control and target.
    """
    _check(state, gate, k=1, n_controls=1)
    apply_matrix(state.amps, state.n, gate.targets, gate.controls, gate.matrix, pool, parts)
    return state


def apply_multi(state: StateVector, gate: Gate, cap: int = DEFAULT_FUSION_CAP,
                pool: Executor | None = None, parts: int = 1) -> StateVector:
    _check(state, gate)
    if gate.k > cap:
        raise ParameterError(f"gate arity {gate.k} exceeds fusion cap {cap}")
    apply_matrix(state.amps, state.n, gate.targets, gate.controls, gate.matrix, pool, parts)
    return state


def apply_gate(state: StateVector, gate: Gate, cap: int = DEFAULT_FUSION_CAP,
               pool: Executor | None = None, parts: int = 1) -> StateVector:
    """Dispatch to the kernel matching the gate's shape; barriers are no-ops."""
    if gate.is_barrier:
        return state
    if gate.k == 1 and not gate.controls:
        return apply_single_grouped(state, gate, pool, parts)
    if gate.k == 1 and len(gate.controls) == 1:
        return apply_controlled(state, gate, pool, parts)
    return apply_multi(state, gate, cap, pool, parts)


def run_local(circuit, state: StateVector, threads: int = 1,
              cap: int = DEFAULT_FUSION_CAP) -> StateVector:
    """Apply every gate of ``circuit`` in program order, in place.

    Each gate's block space is split into ``threads`` disjoint slabs; the
    executor's completion acts as the barrier between gates.
    """
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    if circuit.n != state.n:
        raise ParameterError(f"circuit has {circuit.n} qubits, state has {state.n}")
    if threads == 1:
        for g in circuit.gates:
            apply_gate(state, g, cap)
        return state
    with ThreadPoolExecutor(threads) as pool:
        for g in circuit.gates:
            apply_gate(state, g, cap, pool, threads)
    return state
