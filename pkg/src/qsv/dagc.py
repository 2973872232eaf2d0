"""Dependency-aware gate contraction.

Builds the gate dependency DAG and greedily fuses gates under a per-gate cost
model.  Three merge rules are tried, in priority order within each pass:

1. same-qubit: two uncontrolled gates on the same target set joined by a
   direct edge with no other path between them; matrix ``M_b @ M_a``.
2. cu-consolidate: two gates with identical control and target lists, same
   adjacency condition; ``U = U_b @ U_a`` under the shared controls.
3. kronecker: an uncontrolled gate and the nearest later independent
   uncontrolled gate on other qubits; matrix ``M_b (x) M_a``.

A merge is accepted only if it lowers the summed cost.  Passes repeat until one
makes no merge.  Barriers are DAG nodes that are never merged, and no merge
joins gates separated by a barrier in program order.
"""
from __future__ import annotations

import dataclasses
import heapq
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .circuit import Circuit
from .errors import ParameterError
from .gates import DEFAULT_FUSION_CAP, MAX_ARITY, Gate, fused

SAME_QUBIT = "same-qubit"
CU_CONSOLIDATE = "cu-consolidate"
KRONECKER = "kronecker"
RULES = (SAME_QUBIT, CU_CONSOLIDATE, KRONECKER)


@dataclass
class DepGraph:
    """Per-qubit dependency chains of a circuit.

    ``edges`` holds ``(i, j)`` when ``j`` is the next gate after ``i`` on some
    qubit they share.  ``ancestors[j]`` is a bitmask of every node with a path
    to ``j``.
    """

    nodes: list[int]
    edges: set[tuple[int, int]]
    qubits: list[frozenset[int]]
    preds: list[set[int]] = field(repr=False)
    succs: list[set[int]] = field(repr=False)
    ancestors: list[int] = field(repr=False)

    def has_path(self, i: int, j: int) -> bool:
        return bool((self.ancestors[j] >> i) & 1)

    def independent(self, i: int, j: int) -> bool:
        return not (self.has_path(i, j) or self.has_path(j, i))

    def is_antichain(self, idx: Iterable[int]) -> bool:
        idx = list(idx)
        return all(self.independent(a, b) for p, a in enumerate(idx) for b in idx[p + 1:])


def build_dag(circuit: Circuit) -> DepGraph:
    """Dependency DAG in program order; a barrier with no operands spans all qubits."""
    n_gates = len(circuit.gates)
    last: dict[int, int] = {}
    edges: set[tuple[int, int]] = set()
    preds = [set() for _ in range(n_gates)]
    succs = [set() for _ in range(n_gates)]
    qubits = []
    for j, g in enumerate(circuit.gates):
        qs = frozenset(g.qubits) if g.qubits or not g.is_barrier else frozenset(range(circuit.n))
        qubits.append(qs)
        for q in qs:
            i = last.get(q)
            if i is not None and i not in preds[j]:
                edges.add((i, j))
                preds[j].add(i)
                succs[i].add(j)
            last[q] = j
    anc = [0] * n_gates
    for j in range(n_gates):
        for i in preds[j]:
            anc[j] |= anc[i] | (1 << i)
    return DepGraph(list(range(n_gates)), edges, qubits, preds, succs, anc)


def gate_cost(gate: Gate, n: int) -> float:
    """Abstract arithmetic cost of one application of ``gate`` on ``n`` qubits.

    Each of the ``2**(n-k)`` groups does a ``2**k``-square complex
    matrix-vector product (``2*4**k`` real multiply/add pairs) plus ``2**k``
    copies; every control halves the work.  This gives ``10*2**(n-1)`` for
    k=1 and ``36*2**(n-2)`` for k=2.
    """
    if gate.is_barrier:
        return 0.0
    k = gate.k
    if k > n:
        raise ParameterError(f"{gate!r} has more targets than the {n}-qubit register")
    return float((2 * 4 ** k + 2 ** k) * 2 ** (n - k)) / 2 ** len(gate.controls)


def _reorder(m: np.ndarray, src: tuple[int, ...], dst: tuple[int, ...]) -> np.ndarray:
    """Re-express a matrix over target order ``src`` in target order ``dst``."""
    if src == dst:
        return m
    k = len(src)
    perm = [src.index(q) for q in dst]
    # axes of the reshaped tensor are most-significant bit first
    axes = [k - 1 - perm[k - 1 - a] for a in range(k)]
    t = m.reshape((2,) * (2 * k)).transpose(axes + [k + a for a in axes])
    return t.reshape(m.shape)


def _merged_parts(a: Gate, b: Gate) -> tuple[tuple[Gate, ...], tuple[int, ...]]:
    """Constituents of ``a`` then ``b``; valid as a program order for the merged gate."""
    return (a.parts or (a,)) + (b.parts or (b,)), a.provenance + b.provenance


def fuse_same_qubit(a: Gate, b: Gate) -> Gate:
    """``b`` after ``a`` on the same target set: one gate with matrix ``M_b M_a``."""
    if a.is_barrier or b.is_barrier or a.controls or b.controls:
        raise ParameterError("same-qubit fusion needs two uncontrolled gates")
    if set(a.targets) != set(b.targets):
        raise ParameterError(f"same-qubit fusion needs equal target sets, got {a!r} and {b!r}")
    mb = _reorder(b.matrix, b.targets, a.targets)
    parts, prov = _merged_parts(a, b)
    return fused(mb @ a.matrix, a.targets, parts=parts, provenance=prov)


def fuse_kronecker(a: Gate, b: Gate, cap: int = DEFAULT_FUSION_CAP) -> Gate:
    """Independent gates on disjoint qubits: targets ``a.targets + b.targets``, matrix ``M_b (x) M_a``."""
    if a.is_barrier or b.is_barrier or a.controls or b.controls:
        raise ParameterError("Kronecker fusion needs two uncontrolled gates")
    if set(a.targets) & set(b.targets):
        raise ParameterError(f"Kronecker fusion needs disjoint targets, got {a!r} and {b!r}")
    if a.k + b.k > cap:
        raise ParameterError(f"fused arity {a.k + b.k} exceeds cap {cap}")
    parts, prov = _merged_parts(a, b)
    return fused(np.kron(b.matrix, a.matrix), a.targets + b.targets, parts=parts, provenance=prov)


def fuse_cu(a: Gate, b: Gate) -> Gate:
    """Two controlled gates on the same (controls, targets): ``U = U_b U_a``."""
    if a.is_barrier or b.is_barrier or not a.controls:
        raise ParameterError("CU consolidation needs two controlled gates")
    if a.controls != b.controls or a.targets != b.targets:
        raise ParameterError(f"CU consolidation needs identical control/target, got {a!r} and {b!r}")
    parts, prov = _merged_parts(a, b)
    return fused(b.matrix @ a.matrix, a.targets, a.controls, parts=parts, provenance=prov)


@dataclass
class MergeRecord:
    pass_no: int
    rule: str
    left: tuple[int, ...]
    right: tuple[int, ...]
    cost_before: float
    cost_after: float


@dataclass
class FusionStep:
    members: tuple[int, ...]
    rules: tuple[str, ...]
    gate: Gate


@dataclass
class FusionPlan:
    """Final fused groups (disjoint in original gate indices) plus the merge log."""

    steps: list[FusionStep] = field(default_factory=list)
    merges: list[MergeRecord] = field(default_factory=list)


class _Work:
    """Mutable contraction state: one node per current gate, keyed by min member index."""

    def __init__(self, circuit: Circuit):
        dag = build_dag(circuit)
        self.n = circuit.n
        self.gate = dict(enumerate(circuit.gates))
        self.members = {i: (i,) for i in self.gate}
        self.rules: dict[int, list[str]] = {i: [] for i in self.gate}
        self.preds = {i: set(p) for i, p in enumerate(dag.preds)}
        self.succs = {i: set(s) for i, s in enumerate(dag.succs)}
        fence, self.epoch = 0, {}
        for i, g in enumerate(circuit.gates):
            self.epoch[i] = fence
            fence += g.is_barrier
        self._refresh()

    def _refresh(self) -> None:
        indeg = {i: len(p) for i, p in self.preds.items()}
        ready = sorted(i for i, d in indeg.items() if d == 0)
        order = []
        heapq.heapify(ready)
        while ready:
            i = heapq.heappop(ready)
            order.append(i)
            for j in self.succs[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    heapq.heappush(ready, j)
        assert len(order) == len(self.gate), "contraction produced a cycle"
        self.order = order
        self.pos = {i: p for p, i in enumerate(order)}
        self.anc = {}
        for j in order:
            m = 0
            for i in self.preds[j]:
                m |= self.anc[i] | (1 << i)
            self.anc[j] = m

    def path(self, i: int, j: int) -> bool:
        return bool((self.anc[j] >> i) & 1)

    def sole_path(self, i: int, j: int) -> bool:
        """Direct edge i -> j and no other path between them."""
        if j not in self.succs[i]:
            return False
        return not any(p != i and self.path(i, p) for p in self.preds[j])

    def cost(self, *gates: Gate) -> float:
        return sum(gate_cost(g, self.n) for g in gates)

    def merge(self, a: int, b: int, new: Gate, rule: str) -> int:
        keep, drop = min(a, b), max(a, b)
        members = self.members[a] + self.members[b]
        self.gate[keep] = dataclasses.replace(new, provenance=members)
        self.members[keep] = members
        self.rules[keep] = self.rules[a] + self.rules[b] + [rule]
        for i in (drop,):
            for p in self.preds.pop(i):
                self.succs[p].discard(i)
                if p != keep:
                    self.succs[p].add(keep)
                    self.preds[keep].add(p)
            for s in self.succs.pop(i):
                self.preds[s].discard(i)
                if s != keep:
                    self.preds[s].add(keep)
                    self.succs[keep].add(s)
            del self.gate[i], self.members[i], self.rules[i]
        self.preds[keep].discard(keep)
        self.succs[keep].discard(keep)
        self._refresh()
        return keep


def _controls_between(w: _Work, a: int, b: int, qubits: set[int]) -> bool:
    lo, hi = sorted((w.pos[a], w.pos[b]))
    return any(set(w.gate[i].controls) & qubits for i in w.order[lo + 1:hi])


def _find(w: _Work, rule: str, cap: int):
    """First mergeable pair for ``rule`` in current topological order."""
    for a in w.order:
        ga = w.gate[a]
        if ga.is_barrier:
            continue
        if rule == SAME_QUBIT and not ga.controls:
            for b in sorted(w.succs[a], key=w.pos.get):
                gb = w.gate[b]
                if (not gb.is_barrier and not gb.controls and set(gb.targets) == set(ga.targets)
                        and w.epoch[a] == w.epoch[b] and w.sole_path(a, b)):
                    new = fuse_same_qubit(ga, gb)
                    if w.cost(new) < w.cost(ga, gb):
                        return a, b, new
        elif rule == CU_CONSOLIDATE and ga.controls:
            for b in sorted(w.succs[a], key=w.pos.get):
                gb = w.gate[b]
                if (not gb.is_barrier and gb.controls == ga.controls and gb.targets == ga.targets
                        and w.epoch[a] == w.epoch[b] and w.sole_path(a, b)):
                    new = fuse_cu(ga, gb)
                    if w.cost(new) < w.cost(ga, gb):
                        return a, b, new
        elif rule == KRONECKER and not ga.controls and ga.k < cap:
            for b in w.order[w.pos[a] + 1:]:
                gb = w.gate[b]
                if (gb.is_barrier or gb.controls or ga.k + gb.k > cap
                        or set(ga.targets) & set(gb.targets) or w.epoch[a] != w.epoch[b]
                        or w.path(a, b)):
                    continue
                if _controls_between(w, a, b, set(ga.targets) | set(gb.targets)):
                    continue
                new = fuse_kronecker(ga, gb, cap)
                if w.cost(new) < w.cost(ga, gb):
                    return a, b, new
                break
    return None


def remote_gate_count(circuit: Circuit, local_qubits: int) -> int:
    """Gates whose target set reaches a global qubit, i.e. that need an exchange."""
    return sum(1 for g in circuit.gates if not g.is_barrier and max(g.targets) >= local_qubits)


def _ratio(before: int, after: int) -> float:
    return (before - after) / before if before else 0.0


def contract(circuit: Circuit, cap: int = DEFAULT_FUSION_CAP,
             local_qubits: int | None = None) -> tuple[Circuit, FusionPlan, dict]:
    """Greedy fixed-point fusion; returns ``(circuit, plan, stats)``."""
    if not 1 <= cap <= MAX_ARITY:
        raise ParameterError(f"fusion cap must be in [1, {MAX_ARITY}], got {cap}")
    w = _Work(circuit)
    plan = FusionPlan()
    passes = []
    pass_no = 0
    while True:
        pass_no += 1
        merged = Counter()
        for rule in RULES:
            while (hit := _find(w, rule, cap)) is not None:
                a, b, new = hit
                before = w.cost(w.gate[a], w.gate[b])
                plan.merges.append(MergeRecord(pass_no, rule, w.members[a], w.members[b],
                                               before, w.cost(new)))
                w.merge(a, b, new, rule)
                merged[rule] += 1
        passes.append({"pass": pass_no, "merges": sum(merged.values()),
                       "merges_by_rule": {r: merged[r] for r in RULES},
                       "gates_after": sum(1 for g in w.gate.values() if not g.is_barrier)})
        if not merged:
            break
    out = Circuit(circuit.n, [w.gate[i] if w.gate[i].provenance else
                              dataclasses.replace(w.gate[i], provenance=w.members[i])
                              for i in w.order], source=circuit.source)
    for i in w.order:
        if len(w.members[i]) > 1:
            plan.steps.append(FusionStep(tuple(sorted(w.members[i])), tuple(w.rules[i]), w.gate[i]))
    before, after = circuit.count(), out.count()
    stats = {
        "gates_before": before,
        "gates_after": after,
        "compression_ratio": _ratio(before, after),
        "merges_by_rule": {r: sum(m.rule == r for m in plan.merges) for r in RULES},
        "passes": passes,
        "cost_before": sum(gate_cost(g, circuit.n) for g in circuit.gates),
        "cost_after": sum(gate_cost(g, out.n) for g in out.gates),
    }
    if local_qubits is not None:
        rb, ra = remote_gate_count(circuit, local_qubits), remote_gate_count(out, local_qubits)
        stats.update(remote_gates_before=rb, remote_gates_after=ra,
                     remote_compression_ratio=_ratio(rb, ra))
    return out, plan, stats
