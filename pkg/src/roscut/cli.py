"""Command-line entry point: ``roscut {solve,pretrain,generate,bench}``.

Exit codes: 0 success, 2 invalid flags or configuration, 3 unreadable or
malformed input (graphs, models, suites), 4 shape mismatch (e.g. a model
trained for another k), 5 runtime failure (numerics, generation).
"""
from __future__ import annotations

import argparse
import ctypes
import json
import logging
import os
import sys
import time
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import bench
from .errors import (
    ConfigError,
    GraphFormatError,
    ModelFormatError,
    RosError,
    ShapeError,
)
from .graph import PARSERS, generate_random_regular, perturb_weights, serialize_gset
from .gnn.io import load_model, save_model
from .gnn.model import GnnArchitecture
from .gnn.train import TrainConfig, pretrain
from .mirror import MdConfig
from .oracle import brute_force_oracle
from .pipeline import METHODS, SolveOptions, solve
from .seeds import INSTANCE, derive_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARSE = 3
EXIT_SHAPE = 4
EXIT_RUNTIME = 5

log = logging.getLogger("roscut")

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3


def _tune_allocator() -> None:
    """Keep freed N x d buffers inside the process on glibc.

    Training allocates the same large arrays on every step; with the default
    thresholds glibc hands them back to the kernel and the next step pays
    for fresh page faults, roughly a quarter of the runtime on big graphs.
    """
    if not sys.platform.startswith("linux"):
        return
    try:
        libc = ctypes.CDLL("libc.so.6")
        libc.mallopt(_M_TRIM_THRESHOLD, 1 << 30)
        libc.mallopt(_M_MMAP_THRESHOLD, 32 << 20)
    except (OSError, AttributeError):
        pass


def _read_graph(path: str, fmt: str):
    p = Path(path)
    return PARSERS[fmt](p.read_text(), name=p.stem)


def cmd_solve(args) -> int:
    t0 = time.perf_counter()
    g = _read_graph(args.input, args.format)
    load_ms = (time.perf_counter() - t0) * 1e3
    model = None
    if args.method == "ros":
        if not args.model:
            raise ConfigError("--method ros requires --model")
        model = load_model(args.model, k=args.k)
    opts = SolveOptions(
        method=args.method,
        samples=args.samples,
        seed=args.seed,
        restarts=args.restarts,
        train=TrainConfig(
            learning_rate=args.lr, tolerance=args.ft_tolerance, patience=args.patience,
            max_finetune_iters=args.max_ft_iters, seed=args.seed,
        ),
        md=MdConfig(step_size=args.step_size, max_iters=args.max_iters, tolerance=args.md_tolerance, seed=args.seed),
        model=model,
        timeout=args.timeout,
    )
    res = solve(g, args.k, opts, instance=Path(args.input).name, load_ms=load_ms)
    if args.oracle:
        res.report.oracle_cut, _ = brute_force_oracle(g, args.k)
    text = res.report.to_json(timings=not args.no_timings)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    if args.dump_relaxed:
        Path(args.dump_relaxed).write_text(res.relaxed.to_text())
    if args.trace:
        lines = ["iter,f"] + [f"{i},{v!r}" for i, v in enumerate(res.trace)]
        Path(args.trace).write_text("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_pretrain(args) -> int:
    data = Path(args.data)
    if not data.is_dir():
        raise ConfigError(f"{data} is not a directory")
    files = sorted(p for p in data.iterdir() if p.is_file())
    if not files:
        raise ConfigError(f"no graph files in {data}")
    graphs, bad = [], []
    for p in files:
        try:
            graphs.append(PARSERS[args.format](p.read_text(), name=p.stem))
        except (OSError, UnicodeDecodeError, GraphFormatError) as exc:
            bad.append(f"{p.name}: {exc}")
    if bad:
        raise GraphFormatError("unreadable training files:\n  " + "\n  ".join(bad))
    arch = GnnArchitecture(k=args.k, layers=args.layers, input_dim=args.input_dim, hidden_dim=args.hidden_dim)
    cfg = TrainConfig(learning_rate=args.lr, pretrain_epochs=args.epochs, seed=args.seed)
    res = pretrain(graphs, arch, cfg)
    save_model(res.params, arch, args.out)
    running = 0.0
    for i, loss in enumerate(res.losses, start=1):
        running += loss
        if i % max(1, len(res.losses) // 10) == 0 or i == len(res.losses):
            print(f"step {i}/{len(res.losses)} mean loss {running / i:.6f}")
    return EXIT_OK


def cmd_generate(args) -> int:
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    for i in range(args.count):
        g = generate_random_regular(args.n, args.r, derive_seed(args.seed, INSTANCE, i))
        if args.perturb:
            low, high = args.perturb
            g = perturb_weights(g, low, high, derive_seed(args.seed, INSTANCE, i, 1))
        path = outdir / f"regular_n{args.n}_r{args.r}_{i:04d}.gset"
        path.write_text(serialize_gset(g))
        print(path)
    return EXIT_OK


def cmd_bench(args) -> int:
    suite = bench.BenchSuite.from_toml(args.suite)
    if args.timeout is not None:
        suite.timeout = args.timeout
    rows = bench.run_suite(suite, workers=args.workers or bench.worker_count())
    text = bench.write_csv(rows, timings=not args.no_timings)
    Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roscut", description="Max-k-Cut via simplex relaxation and sampling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one instance and print a JSON report")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=sorted(PARSERS), default="gset")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--method", choices=METHODS, default="ros-vanilla")
    p.add_argument("--model")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--out")
    p.add_argument("--dump-relaxed")
    p.add_argument("--trace", help="write the per-iteration objective as CSV 'iter,f'")
    p.add_argument("--oracle", action="store_true", help="add the brute-force optimum (small graphs only)")
    p.add_argument("--no-timings", action="store_true", help="omit wall-clock fields for byte-stable output")
    p.add_argument("--timeout", type=float)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--patience", type=int, default=100)
    p.add_argument("--ft-tolerance", type=float, default=1e-2)
    p.add_argument("--max-ft-iters", type=int, default=10_000)
    p.add_argument("--step-size", type=float, default=MdConfig.step_size)
    p.add_argument("--max-iters", type=int, default=MdConfig.max_iters)
    p.add_argument("--md-tolerance", type=float, default=MdConfig.tolerance)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("pretrain", help="pre-train a model on a directory of graphs")
    p.add_argument("--data", required=True)
    p.add_argument("--format", choices=sorted(PARSERS), default="gset")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--lr", type=float, default=1e-2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--input-dim", type=int, default=100)
    p.add_argument("--hidden-dim", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pretrain)

    p = sub.add_parser("generate", help="write seeded random regular graphs in Gset format")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--perturb", type=float, nargs=2, metavar=("LOW", "HIGH"))
    p.add_argument("--outdir", default=".")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="run a TOML suite and write a CSV table")
    p.add_argument("--suite", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int)
    p.add_argument("--timeout", type=float, help="per-cell wall-clock budget in seconds")
    p.add_argument("--no-timings", action="store_true")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    threads = int(os.environ.get("ROSCUT_THREADS", "1"))
    _tune_allocator()
    try:
        with threadpool_limits(limits=threads):
            return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GraphFormatError, ModelFormatError, OSError, UnicodeDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ShapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (RosError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
