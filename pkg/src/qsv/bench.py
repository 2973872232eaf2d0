"""Configured simulation runs and ablation grids (the engine behind the CLI)."""
from __future__ import annotations

import dataclasses
import itertools
import multiprocessing
import os
import sys
import time
import traceback
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, parse_generator
from .dagc import contract, remote_gate_count
from .dist import PartitionPlan, execute_rank, run_distributed_detailed
from .dist.engine import DEFAULT_GATHER_CAP
from .dist.sockets import SocketEndpoint, free_listeners
from .errors import ParameterError
from .oracle import ORACLE_MAX_QUBITS, dense_oracle
from .qasm import load_qasm
from .report import SCHEMA, summarize_times
from .smgp import run_staggered
from .statevector import StateVector, run_local

VERIFY_MODES = ("oracle", "single-rank", "off")
VERIFY_TOL = 1e-10


def default_workers() -> int:
    raw = os.environ.get("QSV_THREADS", "")
    try:
        return max(1, int(raw)) if raw else 1
    except ValueError:
        raise ParameterError(f"QSV_THREADS must be a positive integer, got {raw!r}") from None


@dataclass
class RunConfig:
    gen: str | None = None
    qasm: str | None = None
    ranks: int = 1
    workers: int = field(default_factory=default_workers)
    batch_qubits: int | None = None
    buffers: int = 2
    fusion: bool = False
    stagger: bool = False
    bbop: bool = True
    verify: str = "off"
    latency_us: float = 0.0
    repeat: int = 3
    transport: str = "inproc"
    processes: bool = False
    base_port: int | None = None
    segments: int | None = None
    cap: int = 2
    gather_cap: int = DEFAULT_GATHER_CAP
    out_dir: str | None = None

    def source(self) -> str:
        return self.gen if self.gen is not None else str(self.qasm)

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        return {k: v for k, v in d.items() if v is not None}


def load_circuit(cfg: RunConfig) -> Circuit:
    if (cfg.gen is None) == (cfg.qasm is None):
        raise ParameterError("give exactly one of a generator spec or a QASM file")
    return parse_generator(cfg.gen) if cfg.gen is not None else load_qasm(cfg.qasm)


def make_plan(cfg: RunConfig, n: int) -> PartitionPlan:
    if cfg.ranks < 1 or cfg.ranks & (cfg.ranks - 1):
        raise ParameterError(f"--ranks must be a power of two, got {cfg.ranks}")
    m = cfg.ranks.bit_length() - 1
    if m >= n:
        raise ParameterError(f"{cfg.ranks} ranks leave no local qubits for n={n}")
    l = n - m
    b = cfg.batch_qubits if cfg.batch_qubits is not None else max(min(l, 2), l - 3)
    if b > l:
        raise ParameterError(f"--batch-qubits {b} exceeds local qubit count l={l}")
    return PartitionPlan(n, m, b, cfg.buffers if cfg.bbop else 1)


def validate(cfg: RunConfig, n: int) -> PartitionPlan:
    if cfg.verify not in VERIFY_MODES:
        raise ParameterError(f"--verify must be one of {', '.join(VERIFY_MODES)}")
    if cfg.verify == "oracle" and n > ORACLE_MAX_QUBITS:
        raise ParameterError(f"--verify oracle needs n <= {ORACLE_MAX_QUBITS}, got n={n}")
    if cfg.workers < 1 or cfg.repeat < 1 or cfg.buffers < 1:
        raise ParameterError("workers, repeat and buffers must be >= 1")
    if cfg.latency_us < 0:
        raise ParameterError("latency must be non-negative")
    return make_plan(cfg, n)


def _child(circuit, plan, rank, ports, listener, latency, kw, queue):
    try:
        ep = SocketEndpoint(rank, plan.ranks, ports, listener=listener, latency=latency)
        res = execute_rank(circuit, plan, ep, **kw)
        ep.close()
        queue.put(_rank_summary(res))
        code = 0
    except BaseException:
        traceback.print_exc(file=sys.stderr)
        code = 1
    queue.close()
    queue.join_thread()  # os._exit would otherwise drop the queued summary
    sys.stdout.flush()
    os._exit(code)


def _rank_summary(res) -> dict:
    tr = res.trace
    return {"rank": res.rank, "sent_bytes": res.sent_bytes, "sent_messages": res.sent_messages,
            "peak_bytes": res.tracker.peak, "violations": len(tr.buffer_violations()),
            "exchanges": len(tr.exchanges()),
            "batches": len(tr.of(kind="compute")),
            "comm_time": sum(tr.exchange_time(s) for s in tr.exchanges()),
            "timings": res.timings, "files": res.files}


def _run_processes(circuit: Circuit, plan: PartitionPlan, cfg: RunConfig, kw: dict):
    """Socket backend with one OS process per rank; rank 0 stays in this process."""
    listeners = free_listeners(plan.ranks) if cfg.base_port is None else None
    if listeners is None:
        import socket
        listeners = [socket.create_server(("127.0.0.1", cfg.base_port + r)) for r in range(plan.ranks)]
    ports = [ls.getsockname()[1] for ls in listeners]
    mp = multiprocessing.get_context("fork")
    queue = mp.Queue()
    latency = cfg.latency_us * 1e-6
    procs = [mp.Process(target=_child, args=(circuit, plan, r, ports, listeners[r], latency, kw, queue))
             for r in range(1, plan.ranks)]
    for p in procs:
        p.start()
    for ls in listeners[1:]:
        ls.close()
    try:
        ep = SocketEndpoint(0, plan.ranks, ports, listener=listeners[0], latency=latency)
        try:
            res0 = execute_rank(circuit, plan, ep, **kw)
        finally:
            ep.close()
        summaries = [_rank_summary(res0)] + [queue.get(timeout=60) for _ in procs]
    finally:
        for p in procs:
            p.join(timeout=60)
    bad = [p.exitcode for p in procs if p.exitcode != 0]
    if bad:
        raise ParameterError(f"{len(bad)} rank process(es) failed")
    return res0.state, sorted(summaries, key=lambda s: s["rank"])


def execute(circuit: Circuit, plan: PartitionPlan, cfg: RunConfig) -> tuple[StateVector | None, list[dict]]:
    """One full simulation; returns the final state and per-rank summaries."""
    if plan.ranks == 1 and cfg.transport == "inproc":
        t0 = time.perf_counter()
        state = StateVector(circuit.n)
        if cfg.stagger:
            run_staggered(circuit, state, workers=cfg.workers, S=cfg.segments, cap=cfg.cap)
        else:
            run_local(circuit, state, threads=cfg.workers, cap=cfg.cap)
        t1 = time.perf_counter()
        return state, [{"rank": 0, "sent_bytes": 0, "sent_messages": 0,
                        "peak_bytes": state.amps.nbytes, "violations": 0, "exchanges": 0,
                        "batches": 0, "comm_time": 0.0,
                        "timings": {"scatter": 0.0, "execute": t1 - t0, "gather": 0.0}, "files": []}]
    kw = dict(workers=cfg.workers, stagger=cfg.stagger, segments=cfg.segments,
              gather_cap=cfg.gather_cap, out_dir=cfg.out_dir)
    if cfg.transport == "sockets" and cfg.processes:
        return _run_processes(circuit, plan, cfg, kw)
    run = run_distributed_detailed(circuit, plan, cfg.transport, latency=cfg.latency_us * 1e-6, **kw)
    return run.state, [_rank_summary(r) for r in run.ranks]


def _load_files(files: list[str]) -> np.ndarray:
    key = lambda f: int(os.path.basename(f)[4:-4])  # noqa: E731  rank{r}.npy
    return np.concatenate([np.load(f) for f in sorted(files, key=key)])


def cli_run(cfg: RunConfig) -> tuple[dict, int]:
    """Run one configuration; returns the report and the process exit code."""
    t_start = time.perf_counter()
    t0 = time.perf_counter()
    original = load_circuit(cfg)
    t_parse = time.perf_counter() - t0
    plan = validate(cfg, original.n)
    circuit, stats = original, None
    t0 = time.perf_counter()
    if cfg.fusion:
        circuit, _, stats = contract(original, cap=cfg.cap, local_qubits=plan.l)
    t_fuse = time.perf_counter() - t0
    runs, state, summaries = [], None, []
    for _ in range(cfg.repeat):
        t0 = time.perf_counter()
        state, summaries = execute(circuit, plan, cfg)
        runs.append((time.perf_counter() - t0, summaries))
    walls = [w for w, _ in runs]
    phase = lambda k: summarize_times([s[0]["timings"][k] for _, s in runs])  # noqa: E731
    rb = remote_gate_count(original, plan.l)
    report = {
        "schema": SCHEMA,
        "config": cfg.echo(),
        "circuit": {"source": original.source, "n": original.n},
        "plan": {"n": plan.n, "m": plan.m, "l": plan.l, "b": plan.b, "B": plan.B},
        "gates_before": original.count(),
        "gates_after": circuit.count(),
        "compression_ratio": stats["compression_ratio"] if stats else 0.0,
        "merges_by_rule": stats["merges_by_rule"] if stats else {},
        "remote_gates_before": rb,
        "remote_gates_after": remote_gate_count(circuit, plan.l),
        "comm_bytes": sum(s["sent_bytes"] for s in summaries),
        "comm_messages": sum(s["sent_messages"] for s in summaries),
        "pipeline": {
            "exchanges": max(s["exchanges"] for s in summaries),
            "batches_computed": sum(s["batches"] for s in summaries),
            "buffer_violations": sum(s["violations"] for s in summaries),
        },
        "memory": {"peak_bytes_per_rank": max(s["peak_bytes"] for s in summaries),
                   "batched_bound_bytes": plan.batched_bytes(),
                   "naive_total_bytes": plan.naive_bytes_total() if plan.m else (1 << plan.n) * 16},
        "timing": {
            "parse": t_parse, "fuse": t_fuse,
            "run": summarize_times(walls),
            "scatter": phase("scatter"), "execute": phase("execute"), "gather": phase("gather"),
            "comm": summarize_times([max(s["comm_time"] for s in ss) for _, ss in runs]),
        },
        "outputs": summaries[0]["files"] + [f for s in summaries[1:] for f in s["files"]],
        "verify": cfg.verify,
    }
    code = 0
    if cfg.verify != "off":
        ref = dense_oracle(original) if cfg.verify == "oracle" else run_local(original, StateVector(original.n))
        got = state.amps if state is not None else _load_files(report["outputs"])
        dev = float(np.abs(got - ref.amps).max())
        report["deviation"] = dev
        report["verified"] = dev < VERIFY_TOL
        code = 0 if dev < VERIFY_TOL else 2
    report["timing"]["total"] = time.perf_counter() - t_start
    return report, code


TOGGLES = ("fusion", "bbop", "stagger")


def _resize(spec: str, n: int) -> str:
    family, *rest = spec.split(":")
    return ":".join([family, str(n)] + rest[1:])


def cli_ablate(base: RunConfig, toggles: tuple[str, ...] = ("fusion", "bbop"),
               sizes: list[int] | None = None) -> dict:
    """Cartesian on/off grid over ``toggles`` for each circuit size.

    Each cell's ``speedup`` is the all-off cell's median run time over its own.
    """
    for t in toggles:
        if t not in TOGGLES:
            raise ParameterError(f"unknown toggle {t!r}; choose from {', '.join(TOGGLES)}")
    if base.gen is None and sizes:
        raise ParameterError("--sizes needs a generator spec")
    specs = [_resize(base.gen, n) for n in sizes] if sizes else [base.gen]
    cells, speedups = [], []
    for spec in specs:
        baseline = None
        for values in itertools.product((False, True), repeat=len(toggles)):
            cfg = dataclasses.replace(base, gen=spec if base.gen else None,
                                      **dict(zip(toggles, values)))
            report, _ = cli_run(cfg)
            report["cell"] = dict(zip(toggles, values))
            cells.append(report)
            if not any(values):
                baseline = report["timing"]["run"]["median"]
            report["timing"]["speedup"] = baseline / report["timing"]["run"]["median"]
            if any(values):
                speedups.append({"source": spec, "cell": report["cell"],
                                 "speedup": report["timing"]["speedup"]})
    return {"schema": SCHEMA, "toggles": list(toggles), "cells": cells, "speedups": speedups}
