"""Benchmark suites: many (instance, k, method, repetition) solves written to one CSV."""
from __future__ import annotations

import csv
import io
import itertools
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, RosError
from .graph import PARSERS, WeightedGraph, generate_random_regular
from .gnn.io import load_model
from .gnn.train import TrainConfig
from .mirror import MdConfig
from .pipeline import METHODS, SolveOptions, solve
from .seeds import derive_seed

log = logging.getLogger(__name__)

ROW_FIELDS = ["instance", "method", "k", "rep", "seed", "status", "cut", "f", "iterations",
              "opt_ms", "sample_ms", "total_ms"]
SUMMARY_FIELDS = ["method", "k", "n", "cut_mean", "cut_std", "cut", "total_ms_mean"]


@dataclass
class BenchSuite:
    """A grid of solves.

    Instance sources are file paths (resolved against the suite file's
    directory) or ``regular:N:R:SEED`` for a generated r-regular graph.
    Repetition ``i`` runs with seed ``derive_seed(seed, i)``.
    """

    instances: list[str]
    k: list[int]
    methods: list[str]
    repetitions: int = 1
    seed: int = 0
    format: str = "gset"
    samples: int = 100
    restarts: int = 1
    model: str | None = None
    timeout: float | None = None
    md: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        if self.format not in PARSERS:
            raise ConfigError(f"unknown format {self.format!r}")
        if not self.instances:
            raise ConfigError("suite lists no instances")

    @classmethod
    def from_toml(cls, path) -> "BenchSuite":
        path = Path(path)
        data = tomllib.loads(path.read_text())
        ks = data.get("k", [2])
        data["k"] = [ks] if isinstance(ks, int) else list(ks)
        try:
            return cls(base_dir=path.parent.resolve(), **data)
        except TypeError as exc:
            raise ConfigError(f"bad suite file {path}: {exc}") from None

    def cells(self) -> list[tuple[str, int, str, int, int]]:
        return [
            (inst, k, method, rep, derive_seed(self.seed, rep))
            for inst, k, method, rep in itertools.product(self.instances, self.k, self.methods, range(self.repetitions))
        ]


def load_instance(source: str, fmt: str, base_dir: Path) -> WeightedGraph:
    if source.startswith("regular:"):
        _, n, r, seed = source.split(":")
        return generate_random_regular(int(n), int(r), int(seed))
    path = Path(source)
    if not path.is_absolute():
        path = base_dir / path
    return PARSERS[fmt](path.read_text(), name=path.stem)


def _run_cell(suite: BenchSuite, cell) -> dict:
    inst, k, method, rep, seed = cell
    row = {"instance": inst, "method": method, "k": k, "rep": rep, "seed": seed, "status": "ok"}
    t0 = time.perf_counter()
    try:
        g = load_instance(inst, suite.format, suite.base_dir)
    except (OSError, RosError, ValueError) as exc:
        log.warning("cannot load %s: %s", inst, exc)
        row["status"] = "load_error"
        return row
    load_ms = (time.perf_counter() - t0) * 1e3
    try:
        model = None
        if method == "ros":
            if suite.model is None:
                raise ConfigError("method 'ros' needs 'model' in the suite")
            model = load_model(suite.base_dir / suite.model, k=k)
        opts = SolveOptions(
            method=method, samples=suite.samples, seed=seed, restarts=suite.restarts,
            train=TrainConfig(**suite.train), md=MdConfig(**suite.md), model=model, timeout=suite.timeout,
        )
        rep_ = solve(g, k, opts, instance=inst, load_ms=load_ms).report
    except (RosError, OSError, ValueError, FloatingPointError) as exc:
        log.warning("cell %s failed: %s", cell, exc)
        row["status"] = f"error:{type(exc).__name__}"
        return row
    row.update(status=rep_.status, cut=rep_.cut, f=rep_.sampled_f, iterations=rep_.iterations,
               opt_ms=rep_.optimize_ms, sample_ms=rep_.sample_ms, total_ms=rep_.total_ms)
    return row


def run_suite(suite: BenchSuite, workers: int = 1) -> list[dict]:
    """Solve every cell; rows come back in suite order whatever the completion order."""
    cells = suite.cells()
    if workers <= 1:
        return [_run_cell(suite, c) for c in cells]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_cell, itertools.repeat(suite), cells))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict[tuple[str, int], list[dict]] = {}
    for row in rows:
        groups.setdefault((row["method"], row["k"]), []).append(row)
    out = []
    for (method, k), members in groups.items():
        ok = [r for r in members if r["status"] == "ok"]
        cuts = np.array([r["cut"] for r in ok], dtype=float)
        times = [r["total_ms"] for r in ok if r.get("total_ms") is not None]
        mean = float(cuts.mean()) if cuts.size else float("nan")
        std = float(cuts.std()) if cuts.size else float("nan")
        out.append({
            "method": method, "k": k, "n": len(ok),
            "cut_mean": round(mean, 6), "cut_std": round(std, 6), "cut": f"{mean:.2f}±{std:.2f}",
            "total_ms_mean": round(float(np.mean(times)), 3) if times else None,
        })
    return out


def write_csv(rows: list[dict], timings: bool = True) -> str:
    """Per-cell rows, a blank line, then the ``# summary`` block."""
    if not timings:
        rows = [{**r, "opt_ms": None, "sample_ms": None, "total_ms": None} for r in rows]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROW_FIELDS)
    for row in rows:
        writer.writerow([_fmt(row.get(f)) for f in ROW_FIELDS])
    buf.write("\n# summary\n")
    writer.writerow(SUMMARY_FIELDS)
    for row in summarize(rows):
        writer.writerow([_fmt(row.get(f)) for f in SUMMARY_FIELDS])
    return buf.getvalue()


def read_rows(text: str) -> list[dict]:
    """Parse the per-cell part of a bench CSV back into dicts of strings."""
    body = text.split("\n# summary\n", 1)[0].strip("\n")
    return list(csv.DictReader(io.StringIO(body)))


def worker_count() -> int:
    return max(1, int(os.environ.get("ROSCUT_THREADS", "1")))
