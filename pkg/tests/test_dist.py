from __future__ import annotations

import socket
import threading
import time

import numpy as np
import pytest

from qsv import gates as G
from qsv.acceptance import distributed_test_circuit
from qsv.circuit import Circuit, gen_hea, gen_qft, random_circuit
from qsv.dist import (Locality, MsgKind, PartitionPlan, Tag, classify_gate, execute_rank, in_process,
                      peer_rank, run_distributed, run_distributed_detailed)
from qsv.dist.engine import PipelineTrace
from qsv.dist.sockets import HEADER_SIZE, local_sockets, pack_frame, read_frame
from qsv.dist.transport import decode_amps, encode_amps
from qsv.errors import DistributedError, HandshakeError, ParameterError, RemoteAbort, TransportError
from qsv.statevector import StateVector, run_local

from conftest import max_dev

BACKENDS = ["inproc", "sockets"]


def endpoints(kind, ranks, **kw):
    return in_process(ranks, **kw) if kind == "inproc" else local_sockets(ranks, **kw)


def run_threads(fn, eps):
    out, errs = [None] * len(eps), [None] * len(eps)

    def body(ep):
        try:
            out[ep.rank] = fn(ep)
        except BaseException as e:
            errs[ep.rank] = e

    ts = [threading.Thread(target=body, args=(ep,)) for ep in eps]
    for t in ts:
        t.start()
    for t in ts:
        t.join(30)
    for ep in eps:
        ep.close()
    return out, errs


class TestPlan:
    def test_fields(self):
        p = PartitionPlan(7, 2, 3, 2)
        assert (p.ranks, p.l, p.n_batches) == (4, 5, 4)
        assert p.batched_bytes() == (32 + 2 * 8) * 16

    def test_naive_total(self):
        p = PartitionPlan(10, 2, 4)
        assert p.naive_bytes_total() == 3 * 2 ** 9 * 16

    @pytest.mark.parametrize("args", [(4, 4, 0), (6, 1, 6), (6, 1, 2, 0), (0, 0, 0)])
    def test_invalid(self, args):
        with pytest.raises(ParameterError):
            PartitionPlan(*args)

    def test_for_ranks(self):
        assert PartitionPlan.for_ranks(12, 4) == PartitionPlan(12, 2, 7, 2)
        with pytest.raises(ParameterError):
            PartitionPlan.for_ranks(12, 3)


class TestLocality:
    plan = PartitionPlan(7, 2, 2)

    def test_local(self):
        assert classify_gate(G.h(3), self.plan) is Locality.LOCAL

    def test_target_remote(self):
        assert classify_gate(G.h(6), self.plan) is Locality.TARGET_REMOTE

    def test_control_remote(self):
        assert classify_gate(G.cx(5, 2), self.plan) is Locality.CONTROL_REMOTE

    def test_both_remote(self):
        assert classify_gate(G.cx(5, 6), self.plan) is Locality.BOTH_REMOTE

    def test_peer_examples(self):
        assert peer_rank(0, 5, 5) == 1 and peer_rank(2, 6, 5) == 0

    def test_peer_involution(self):
        for r in range(8):
            for t in (5, 6, 7):
                assert peer_rank(peer_rank(r, t, 5), t, 5) == r

    def test_no_peer_for_local(self):
        with pytest.raises(ParameterError):
            peer_rank(0, 4, 5)


class TestWire:
    def test_tag_pack(self):
        raw = Tag(3, 9, MsgKind.FORWARD).pack()
        assert len(raw) == 24 and raw[:8] == (3).to_bytes(8, "little")
        assert Tag.unpack(raw) == (3, 9, 1)

    def test_frame_layout(self):
        frame = pack_frame(Tag(1, 2, 3), b"abcd")
        assert len(frame) == HEADER_SIZE + 4 and frame[:8] == (4).to_bytes(8, "little")

    def test_amps_bytes(self, rng):
        a = rng.normal(size=8) + 1j * rng.normal(size=8)
        raw = encode_amps(a)
        assert len(raw) == 128 and np.array_equal(decode_amps(raw, 8), a)
        with pytest.raises(TransportError):
            decode_amps(raw[:-1])

    def test_truncated_frame(self):
        a, b = socket.socketpair()
        a.sendall(pack_frame(Tag(0, 0, 1), b"x" * 64)[:HEADER_SIZE + 10])
        a.close()
        with pytest.raises(TransportError, match="truncated"):
            read_frame(b)
        b.close()

    def test_clean_eof(self):
        a, b = socket.socketpair()
        a.close()
        assert read_frame(b) is None
        b.close()


@pytest.mark.parametrize("kind", BACKENDS)
class TestTransport:
    def test_batch_round_trip(self, kind, rng):
        data = rng.normal(size=1024) + 1j * rng.normal(size=1024)
        tag = Tag(5, 7, MsgKind.FORWARD)

        def body(ep):
            if ep.rank == 0:
                ep.isend(1, tag, data)
                return decode_amps(ep.recv(1, Tag(5, 7, MsgKind.BACKWARD)), 1024)
            got = ep.irecv(0, tag).wait()
            ep.send(0, Tag(5, 7, MsgKind.BACKWARD), got)
            return None

        out, errs = run_threads(body, endpoints(kind, 2))
        assert errs == [None, None]
        assert np.array_equal(out[0], data)

    def test_barrier_staggered_arrival(self, kind):
        arrive, leave = {}, {}

        def body(ep):
            time.sleep(0.02 * ep.rank)
            arrive[ep.rank] = time.monotonic()
            ep.barrier()
            leave[ep.rank] = time.monotonic()

        _, errs = run_threads(body, endpoints(kind, 4))
        assert errs == [None] * 4
        assert min(leave.values()) >= max(arrive.values())

    def test_abort_reaches_peers(self, kind):
        def body(ep):
            if ep.rank == 1:
                ep.abort("boom")
                return None
            return ep.recv(1, Tag(0, 0, MsgKind.FORWARD))

        _, errs = run_threads(body, endpoints(kind, 2, timeout=10))
        assert isinstance(errs[0], RemoteAbort) and "boom" in str(errs[0])

    def test_latency_applied(self, kind):
        def body(ep):
            if ep.rank == 0:
                t0 = time.monotonic()
                ep.recv(1, Tag(0, 0, MsgKind.FORWARD))
                return time.monotonic() - t0
            ep.send(0, Tag(0, 0, MsgKind.FORWARD), b"")

        out, _ = run_threads(body, endpoints(kind, 2, latency=0.05))
        assert out[0] >= 0.045

    def test_timeout(self, kind):
        def body(ep):
            if ep.rank == 0:
                ep.recv(1, Tag(0, 0, MsgKind.FORWARD))

        _, errs = run_threads(body, endpoints(kind, 2, timeout=0.2))
        assert isinstance(errs[0], TransportError)


class TestEngine:
    def test_two_rank_hadamard(self):
        c = Circuit(4, [G.h(3)])
        got = run_distributed(c, PartitionPlan(4, 1, 1))
        assert np.array_equal(got.amps, run_local(c, StateVector(4)).amps)

    def test_one_rank_is_run_local(self, rng):
        c = random_circuit(8, 60, rng)
        got = run_distributed(c, PartitionPlan(8, 0, 5))
        assert np.array_equal(got.amps, run_local(c, StateVector(8)).amps)

    def test_qft16_four_ranks(self):
        c = gen_qft(16)
        got = run_distributed(c, PartitionPlan.for_ranks(16, 4))
        assert max_dev(got.amps, run_local(c, StateVector(16)).amps) < 1e-12

    def test_hea16_four_ranks(self):
        c = gen_hea(16, 5, 7)
        got = run_distributed(c, PartitionPlan.for_ranks(16, 4))
        assert max_dev(got.amps, run_local(c, StateVector(16)).amps) < 1e-12

    def test_backends_identical(self):
        c = distributed_test_circuit(16)
        plan = PartitionPlan.for_ranks(16, 4, B=3)
        a = run_distributed(c, plan, "inproc").amps
        b = run_distributed(c, plan, "sockets").amps
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("m,B,db", [(1, 1, 0), (2, 2, 1), (3, 3, 3), (3, 2, 2)])
    def test_grid_sample(self, m, B, db):
        n = 10
        c = distributed_test_circuit(n)
        plan = PartitionPlan(n, m, n - m - db, B)
        got = run_distributed(c, plan)
        assert max_dev(got.amps, run_local(c, StateVector(n)).amps) < 1e-12

    def test_multi_target_remote(self, rng):
        u = G.unitary(G.random_unitary(4, rng), [2, 9])
        v = G.unitary(G.random_unitary(4, rng), [8, 9], [1])
        c = Circuit(10, [G.h(q) for q in range(10)] + [u, v])
        got = run_distributed(c, PartitionPlan(10, 2, 4, 2))
        assert max_dev(got.amps, run_local(c, StateVector(10)).amps) < 1e-12

    def test_control_remote_sends_nothing(self):
        plan = PartitionPlan(8, 1, 3)
        base = run_distributed_detailed(Circuit(8, [G.h(0)]), plan)
        ctrl = run_distributed_detailed(Circuit(8, [G.h(0), G.cx(7, 1)]), plan)
        assert [r.sent_messages for r in ctrl.ranks] == [r.sent_messages for r in base.ranks]
        assert max_dev(ctrl.state.amps,
                       run_local(Circuit(8, [G.h(0), G.cx(7, 1)]), StateVector(8)).amps) < 1e-12

    def test_batch_completeness_and_symmetry(self):
        plan = PartitionPlan(10, 1, 5, 2)
        run = run_distributed_detailed(Circuit(10, [G.h(9)]), plan)
        owner, sender = run.ranks[0].trace, run.ranks[1].trace
        (seq,) = owner.exchanges()
        assert owner.role(seq) == "owner" and sender.role(seq) == "sender"
        for kind in ("recv", "compute", "send_back"):
            assert sorted(e.batch for e in owner.of(seq, kind)) == list(range(plan.n_batches))
        sent = len(sender.of(seq, "send")) << plan.b
        returned = len(owner.of(seq, "send_back")) << plan.b
        assert sent == returned == 1 << plan.l

    @pytest.mark.parametrize("B", [1, 2, 3])
    def test_buffers_never_shared(self, B):
        run = run_distributed_detailed(distributed_test_circuit(12), PartitionPlan(12, 2, 5, B),
                                       latency=50e-6)
        assert all(r.trace.buffer_violations() == [] for r in run.ranks)

    def test_violation_detector(self):
        tr = PipelineTrace(0)
        tr.add("exchange_start", 0)
        tr.add("recv_post", 0, batch=0, slot=0)
        tr.add("recv", 0, batch=0, slot=0)
        tr.add("compute_start", 0, batch=0, slot=0)
        tr.add("recv_post", 0, batch=1, slot=0)
        assert len(tr.buffer_violations()) == 1

    def test_memory_within_bound(self):
        plan = PartitionPlan(14, 2, 6, 2)
        run = run_distributed_detailed(distributed_test_circuit(14), plan)
        assert max(r.tracker.peak for r in run.ranks) <= plan.batched_bytes() + (1 << 20)

    def test_handshake_mismatch(self):
        c = gen_qft(6)
        plans = [PartitionPlan(6, 1, 2, 2), PartitionPlan(6, 1, 2, 3)]
        _, errs = run_threads(lambda ep: execute_rank(c, plans[ep.rank], ep), in_process(2, timeout=10))
        assert all(isinstance(e, DistributedError) for e in errs)
        assert isinstance(errs[0].cause, HandshakeError) and "B" in str(errs[0])

    def test_errors_carry_rank_and_context(self):
        c = Circuit(6, [G.unitary(np.eye(4), [4, 5])])
        with pytest.raises(DistributedError) as info:
            run_distributed(c, PartitionPlan(6, 2, 0, 2), timeout=10)
        assert info.value.rank >= 0 and "batch qubits" in str(info.value)

    def test_gather_cap_writes_files(self, tmp_path):
        c = gen_qft(10)
        plan = PartitionPlan.for_ranks(10, 4)
        run = run_distributed_detailed(c, plan, gather_cap=1024, out_dir=str(tmp_path))
        assert run.state is None and len(run.files) == 4
        full = np.concatenate([np.load(tmp_path / f"rank{r}.npy") for r in range(4)])
        assert max_dev(full, run_local(c, StateVector(10)).amps) < 1e-12

    def test_gather_cap_needs_out_dir(self):
        with pytest.raises(DistributedError):
            run_distributed(gen_qft(6), PartitionPlan(6, 1, 2), gather_cap=16, timeout=10)

    def test_stagger_in_ranks(self):
        c = gen_hea(12, 3, 1)
        got = run_distributed(c, PartitionPlan(12, 1, 6), stagger=True, workers=2, segments=4)
        assert max_dev(got.amps, run_local(c, StateVector(12)).amps) < 1e-12
