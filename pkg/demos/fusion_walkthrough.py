"""
Gate fusion on the benchmark circuits
=====================================

Contract the seeded HEA and QAOA generators, look at which rules fired and
check that the fused circuit still produces the same state.
"""
from __future__ import annotations

import numpy as np

from qsv import contract, dense_oracle, gate_cost, gen_hea, gen_qaoa, gen_qft, gates as G

# The cost model: one uncontrolled k-qubit gate on n qubits.
n = 20
print("cost k=1:", gate_cost(G.h(0), n), "= 10 * 2^(n-1):", 10 * 2 ** (n - 1))
print("cost k=2:", gate_cost(G.unitary(np.eye(4), [0, 1]), n), "= 36 * 2^(n-2):", 36 * 2 ** (n - 2))

# Contract each family at n=20 and report the compression ratio.
for name, circuit in [("hea", gen_hea(20, 5, 7)), ("qaoa", gen_qaoa(20, 2, 7)), ("qft", gen_qft(20))]:
    _, plan, stats = contract(circuit)
    print(f"{name:5s} {stats['gates_before']:4d} -> {stats['gates_after']:4d} gates, "
          f"ratio {stats['compression_ratio']:.3f}, passes {len(stats['passes'])}, "
          f"rules {stats['merges_by_rule']}")

# HEA compresses far more than QAOA: its rotation triples collapse on each qubit and
# pairs of neighbours then fuse, while QAOA's CX-RZ-CX blocks chain through shared qubits.

# A scaled-down instance small enough for the dense oracle.
small = gen_hea(10, 5, 7)
fused, plan, _ = contract(small)
dev = np.abs(dense_oracle(small).amps - dense_oracle(fused).amps).max()
print(f"n=10 HEA: {len(small)} -> {len(fused)} gates, oracle deviation {dev:.1e}")

# The first few merges, with the cost drop each one earned.
for m in plan.merges[:5]:
    print(f"  pass {m.pass_no} {m.rule:15s} {m.left} + {m.right}: "
          f"{m.cost_before:.0f} -> {m.cost_after:.0f}")
