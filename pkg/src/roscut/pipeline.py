"""Relax, optimise, sample: the end-to-end solve behind the CLI and the bench harness."""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import ConfigError, ShapeError
from .graph import IntegerAssignment, WeightedGraph
from .gnn.model import GnnArchitecture, GnnParameters, init_parameters
from .gnn.train import TrainConfig, finetune, instance_embeddings
from .mirror import MdConfig, solve_md
from .relax import AssignmentMatrix, cut_from_objective, objective_f
from .sampling import SampleConfig, sample_best_of
from .seeds import MD_INIT, PARAM_INIT, SAMPLING, derive_seed

METHODS = ("ros", "ros-vanilla", "md")


@dataclass
class SolveReport:
    instance: str
    method: str
    k: int
    seed: int
    cut: float
    relaxed_f: float
    sampled_f: float
    iterations: int
    restarts: int
    status: str = "ok"
    load_ms: float = 0.0
    optimize_ms: float = 0.0
    sample_ms: float = 0.0
    oracle_cut: float | None = None
    config: dict[str, Any] = field(default_factory=dict)

    @property
    def total_ms(self) -> float:
        return self.load_ms + self.optimize_ms + self.sample_ms

    def to_dict(self, timings: bool = True) -> dict[str, Any]:
        out = asdict(self)
        timing = {k: out.pop(k) for k in ("load_ms", "optimize_ms", "sample_ms")}
        out["timings_ms"] = (
            {"load": timing["load_ms"], "optimize": timing["optimize_ms"], "sample": timing["sample_ms"]}
            if timings else None
        )
        if out["oracle_cut"] is None:
            del out["oracle_cut"]
        return out

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), sort_keys=True, indent=2) + "\n"


@dataclass
class SolveResult:
    report: SolveReport
    labels: IntegerAssignment
    relaxed: AssignmentMatrix
    trace: list[float]


@dataclass
class SolveOptions:
    method: str = "ros-vanilla"
    samples: int = 100
    seed: int = 0
    restarts: int = 1
    train: TrainConfig = field(default_factory=TrainConfig)
    md: MdConfig = field(default_factory=MdConfig)
    arch: GnnArchitecture | None = None
    model: tuple[GnnParameters, GnnArchitecture] | None = None
    timeout: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        if self.method == "ros" and self.model is None:
            raise ConfigError("method 'ros' needs a pre-trained model")

    def echo(self, k: int) -> dict[str, Any]:
        cfg: dict[str, Any] = {"samples": self.samples, "restarts": self.restarts}
        if self.method == "md":
            md = asdict(self.md)
            md.pop("init")
            cfg["md"] = md
        else:
            cfg["train"] = asdict(self.train)
            arch = self.model[1] if self.model is not None else (self.arch or GnnArchitecture(k=k))
            cfg["arch"] = arch.to_dict()
        return cfg


def _optimize_once(g: WeightedGraph, k: int, opts: SolveOptions, restart: int, deadline):
    seed = opts.seed
    if opts.method == "md":
        cfg = MdConfig(
            step_size=opts.md.step_size, max_iters=opts.md.max_iters, tolerance=opts.md.tolerance,
            init=opts.md.init, init_noise=opts.md.init_noise, seed=derive_seed(seed, MD_INIT, restart),
        )
        res = solve_md(g, k, cfg, deadline=deadline)
        return res.x, res.iterations, res.trace, res.timed_out
    if opts.method == "ros":
        params, arch = opts.model
    else:
        arch = opts.arch or GnnArchitecture(k=k)
        params = init_parameters(arch, derive_seed(seed, PARAM_INIT, restart))
    if arch.k != k:
        raise ConfigError(f"architecture has output_dim {arch.k} but k={k}")
    h0 = instance_embeddings(arch, g, seed, restart)
    res = finetune(params, arch, g, opts.train, h0=h0, deadline=deadline)
    return res.x, res.iterations, res.trace, res.timed_out


def solve(g: WeightedGraph, k: int, opts: SolveOptions, instance: str = "", load_ms: float = 0.0) -> SolveResult:
    """Optimise the relaxation, then decode by best-of-T sampling.

    With several restarts the one with the lowest sampled f is kept; ties go
    to the earliest restart.
    """
    if k < 2:
        raise ConfigError("k must be >= 2")
    if opts.method == "ros" and opts.model[1].k != k:
        raise ShapeError(f"model output_dim is {opts.model[1].k} but k={k}")
    deadline = time.monotonic() + opts.timeout if opts.timeout else None
    best = None
    opt_ms = samp_ms = 0.0
    iters = 0
    timed_out = False
    for r in range(opts.restarts):
        t0 = time.perf_counter()
        x, it, trace, to = _optimize_once(g, k, opts, r, deadline)
        t1 = time.perf_counter()
        labels, fval, _ = sample_best_of(x, g, SampleConfig(opts.samples, derive_seed(opts.seed, SAMPLING, r)))
        t2 = time.perf_counter()
        opt_ms += (t1 - t0) * 1e3
        samp_ms += (t2 - t1) * 1e3
        iters += it
        timed_out |= to
        if best is None or fval < best[1]:
            best = (labels, fval, x, trace)
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
    labels, fval, x, trace = best
    report = SolveReport(
        instance=instance or g.name,
        method=opts.method,
        k=k,
        seed=opts.seed,
        cut=cut_from_objective(g, fval),
        relaxed_f=objective_f(x, g),
        sampled_f=fval,
        iterations=iters,
        restarts=opts.restarts,
        status="timeout" if timed_out else "ok",
        load_ms=load_ms,
        optimize_ms=opt_ms,
        sample_ms=samp_ms,
        config=opts.echo(k),
    )
    return SolveResult(report, labels, x, trace)


def cut_identity_holds(g: WeightedGraph, report: SolveReport, rtol: float = 1e-6) -> bool:
    expect = g.total_edge_weight - report.sampled_f / 2.0
    return bool(np.isclose(report.cut, expect, rtol=rtol, atol=rtol))
