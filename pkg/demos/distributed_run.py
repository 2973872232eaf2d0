"""
A four-rank run over loopback sockets
=====================================

Simulate an HEA circuit on four ranks, compare with the single-process
kernels and look at the memory and traffic the exchange needed.
"""
from __future__ import annotations

import numpy as np

from qsv import gen_hea, run_local, StateVector
from qsv.dist import Locality, PartitionPlan, classify_gate, run_distributed_detailed

circuit = gen_hea(16, 5, 7)
plan = PartitionPlan.for_ranks(16, 4, B=2)
print(f"n={plan.n}: {plan.ranks} ranks x 2^{plan.l} amplitudes, batches of 2^{plan.b}, B={plan.B}")

kinds = {}
for g in circuit:
    kinds[classify_gate(g, plan)] = kinds.get(classify_gate(g, plan), 0) + 1
print({k.value: v for k, v in kinds.items()})

run = run_distributed_detailed(circuit, plan, transport="sockets")
ref = run_local(circuit, StateVector(16)).amps
print("max deviation vs single process:", np.abs(run.state.amps - ref).max())

# Peak = partition + B receive buffers + one staging batch for the outgoing copy.
# The staging batch is the fixed overhead on top of (2^l + B * 2^b) * 16.
staging = (1 << plan.b) * 16
for r in run.ranks:
    print(f"rank {r.rank}: sent {r.sent_bytes} bytes in {r.sent_messages} messages, "
          f"peak {r.tracker.peak} bytes = {plan.batched_bytes()} + staging {staging}")
print(f"cluster total {sum(r.tracker.peak for r in run.ranks)} bytes "
      f"vs unbatched {plan.naive_bytes_total()}")
assert sum(kinds.get(k, 0) for k in (Locality.TARGET_REMOTE, Locality.BOTH_REMOTE)) > 0
