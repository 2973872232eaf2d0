"""``qsv`` command line: run, ablate, verify."""
from __future__ import annotations

import argparse
import sys

from . import __version__
from .bench import TOGGLES, VERIFY_MODES, RunConfig, cli_ablate, cli_run, default_workers
from .errors import QsvError
from .report import dump


def _on_off(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError(f"expected on or off, got {value!r}")
    return value == "on"


def _int_list(value: str) -> list[int]:
    try:
        return [int(v) for v in value.split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None


def _add_run_options(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--gen", help="generator spec: qft:n | qaoa:n:p:seed | hea:n:layers:seed")
    src.add_argument("--qasm", help="OpenQASM 2.0 file")
    p.add_argument("--ranks", type=int, default=1, help="number of ranks (power of two)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads per rank (default: $QSV_THREADS or 1)")
    p.add_argument("--batch-qubits", type=int, default=None,
                   help="batch payload is 2^b amplitudes (default: l-3, at least 2)")
    p.add_argument("--buffers", type=int, default=2, help="receive buffers per rank")
    p.add_argument("--fusion", type=_on_off, default=False, metavar="on|off")
    p.add_argument("--stagger", type=_on_off, default=False, metavar="on|off")
    p.add_argument("--bbop", type=_on_off, default=True, metavar="on|off",
                   help="off runs exchanges stop-and-wait (one buffer)")
    p.add_argument("--verify", choices=VERIFY_MODES, default="off")
    p.add_argument("--latency-us", type=float, default=0.0, help="injected per-message latency")
    p.add_argument("--repeat", type=int, default=3, help="repetitions; timings report the median")
    p.add_argument("--transport", choices=("inproc", "sockets"), default="inproc")
    p.add_argument("--rank-threads", action="store_true",
                   help="with --transport sockets, run ranks as threads instead of processes")
    p.add_argument("--base-port", type=int, default=None, help="socket ports base_port + rank")
    p.add_argument("--segments", type=int, default=None, help="stagger segment count S")
    p.add_argument("--gather-cap", type=int, default=None,
                   help="largest state (bytes) gathered at rank 0; above it ranks write .npy files")
    p.add_argument("--out-dir", default=None, help="directory for per-rank state files")
    p.add_argument("--out", default=None, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json")


def _config(args) -> RunConfig:
    cfg = RunConfig(
        gen=args.gen, qasm=args.qasm, ranks=args.ranks,
        workers=args.workers if args.workers is not None else default_workers(),
        batch_qubits=args.batch_qubits, buffers=args.buffers, fusion=args.fusion,
        stagger=args.stagger, bbop=args.bbop, verify=args.verify, latency_us=args.latency_us,
        repeat=args.repeat, transport=args.transport,
        processes=args.transport == "sockets" and not args.rank_threads,
        base_port=args.base_port, segments=args.segments, out_dir=args.out_dir,
    )
    if args.gather_cap is not None:
        cfg.gather_cap = args.gather_cap
    return cfg


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as f:
            f.write(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsv", description="Distributed statevector simulator")
    parser.add_argument("--version", action="version", version=f"qsv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one configuration and print a report")
    _add_run_options(run)

    ablate = sub.add_parser("ablate", help="on/off grid over optimization toggles")
    _add_run_options(ablate)
    ablate.add_argument("--toggles", default="fusion,bbop",
                        help=f"comma-separated subset of {','.join(TOGGLES)}")
    ablate.add_argument("--sizes", type=_int_list, default=None,
                        help="qubit counts substituted into the generator spec, e.g. 14,16,18")

    verify = sub.add_parser("verify", help="run the acceptance battery")
    verify.add_argument("--only", default=None, help="comma-separated check ids, e.g. 1,2,7a")
    verify.add_argument("--inject-fault", action="store_true",
                        help="flip one matrix sign inside the kernels (mutation check)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            report, code = cli_run(_config(args))
            _emit(dump(report, args.format), args.out)
            if code:
                print(f"qsv: verification failed: deviation {report['deviation']:.3e}", file=sys.stderr)
            return code
        if args.command == "ablate":
            toggles = tuple(t for t in args.toggles.split(",") if t)
            result = cli_ablate(_config(args), toggles, args.sizes)
            if args.format == "csv":
                _emit(dump(result["cells"], "csv"), args.out)
            else:
                _emit(dump(result, "json"), args.out)
            return 0
        from .acceptance import run_all
        keys = [k for k in args.only.split(",") if k] if args.only else None
        results = run_all(keys, fault=args.inject_fault)
        return 0 if all(r.passed for r in results) else 1
    except (QsvError, KeyError, OSError) as e:
        print(f"qsv: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
