"""Staggered multi-gate parallelism.

Independent gates are grouped and executed concurrently, each on a different
segment of the statevector per time step.  Segment ``j`` is the contiguous
index range whose top ``s`` bits equal ``j``.  At step ``tau`` gate ``g`` works
on segment ``(g + tau) mod S``, so no two gates touch the same segment at once
and after ``S`` steps every gate has covered the whole vector.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .circuit import Circuit
from .dagc import DepGraph, build_dag
from .errors import ParameterError
from .gates import Gate
from .statevector import StateVector, apply_gate, apply_matrix

MAX_SEGMENT_BITS = 4


def default_segments(workers: int) -> int:
    return min(1 << max(0, math.ceil(math.log2(max(workers, 1)))), 1 << MAX_SEGMENT_BITS)


def _bits(S: int) -> int:
    if S < 1 or S & (S - 1):
        raise ParameterError(f"segment count must be a power of two, got {S}")
    return S.bit_length() - 1


def stagger_schedule(G: int, S: int) -> list[list[int]]:
    """``table[g][tau]`` is the segment gate ``g`` works on at step ``tau``."""
    _bits(S)
    if not 1 <= G <= S:
        raise ParameterError(f"group size must be in [1, {S}], got {G}")
    return [[(g + tau) % S for tau in range(S)] for g in range(G)]


@dataclass
class StaggerGroup:
    """Pairwise qubit-disjoint gates that fit inside one segment each."""

    gates: list[Gate]
    indices: list[int]
    s: int
    schedule: list[list[int]] = field(default_factory=list)

    def __post_init__(self):
        if not self.schedule:
            self.schedule = stagger_schedule(len(self.gates), 1 << self.s)

    @property
    def S(self) -> int:
        return 1 << self.s

    def validate(self, local_qubits: int) -> None:
        limit = local_qubits - self.s
        seen: set[int] = set()
        if len(self.gates) > self.S:
            raise ParameterError(f"group of {len(self.gates)} gates exceeds {self.S} segments")
        for g in self.gates:
            if g.is_barrier or max(g.qubits) >= limit:
                raise ParameterError(f"{g!r} does not fit a segment of {limit} qubits")
            if seen & set(g.qubits):
                raise ParameterError("group gates must act on disjoint qubits")
            seen |= set(g.qubits)


def plan_groups(circuit: Circuit, dag: DepGraph | None = None, S: int = 4,
                local_qubits: int | None = None) -> list[StaggerGroup | tuple[int, Gate]]:
    """Split the circuit into stagger groups and residual ``(index, gate)`` singletons.

    Works on the DAG frontier: the ready gates always form an antichain (and so
    act on disjoint qubits).  Up to ``S`` ready gates that fit a segment form a
    group; when fewer than two fit, the earliest ready gate runs on its own.
    The returned items are in a valid execution order.
    """
    s = _bits(S)
    dag = dag or build_dag(circuit)
    l = circuit.n if local_qubits is None else local_qubits
    limit = l - s
    indeg = [len(p) for p in dag.preds]
    ready = sorted(i for i, d in enumerate(indeg) if d == 0)
    out: list = []

    def finish(i):
        for j in dag.succs[i]:
            indeg[j] -= 1
            if indeg[j] == 0:
                ready.append(j)

    while ready:
        ready.sort()
        fits = [i for i in ready
                if not circuit.gates[i].is_barrier and max(circuit.gates[i].qubits) < limit][:S]
        if S > 1 and len(fits) >= 2:
            out.append(StaggerGroup([circuit.gates[i] for i in fits], fits, s))
            done = fits
        else:
            done = [ready[0]]
            out.append((ready[0], circuit.gates[ready[0]]))
        for i in done:
            ready.remove(i)
        for i in done:
            finish(i)
    return out


def _cell(amps, lo: int, hi: int, nbits: int, gate: Gate) -> None:
    apply_matrix(amps[lo:hi], nbits, gate.targets, gate.controls, gate.matrix)


def execute_staggered(state: StateVector, group: StaggerGroup, workers: int = 1,
                      pool: ThreadPoolExecutor | None = None, trace: list | None = None) -> StateVector:
    """Run the group's S x S schedule with a barrier after each step.

    ``trace`` (if given) receives ``(tau, gate, segment, lo, hi)`` per cell.
    """
    group.validate(state.n)
    S, seg_bits = group.S, state.n - group.s
    size = 1 << seg_bits
    own = pool is None and workers > 1
    if own:
        pool = ThreadPoolExecutor(workers)
    try:
        for tau in range(S):
            cells = []
            for g, gate in enumerate(group.gates):
                seg = group.schedule[g][tau]
                lo = seg * size
                if trace is not None:
                    trace.append((tau, g, seg, lo, lo + size))
                cells.append((state.amps, lo, lo + size, seg_bits, gate))
            if pool is None:
                for c in cells:
                    _cell(*c)
            else:
                for f in [pool.submit(_cell, *c) for c in cells]:
                    f.result()
    finally:
        if own:
            pool.shutdown()
    return state


def replay_serial(state: StateVector, group: StaggerGroup) -> StateVector:
    """Apply each segment's gates one at a time, in the order the schedule visits them."""
    S, seg_bits = group.S, state.n - group.s
    size = 1 << seg_bits
    for seg in range(S):
        visits = sorted((group.schedule[g].index(seg), g) for g in range(len(group.gates)))
        for _, g in visits:
            _cell(state.amps, seg * size, (seg + 1) * size, seg_bits, group.gates[g])
    return state


def run_staggered(circuit: Circuit, state: StateVector, workers: int = 1, S: int | None = None,
                  cap: int = 2) -> StateVector:
    """Execute a whole circuit with SMGP groups; residual gates use the plain kernels."""
    S = S or default_segments(workers)
    items = plan_groups(circuit, S=S)
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for item in items:
            if isinstance(item, StaggerGroup):
                execute_staggered(state, item, pool=pool)
            else:
                apply_gate(state, item[1], cap, pool, workers)
    finally:
        if pool is not None:
            pool.shutdown()
    return state
