"""Entropic mirror descent (exponentiated gradient) on the simplex product."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StepTooLargeError
from .graph import WeightedGraph
from .relax import AssignmentMatrix, gradient_f, objective_f

log = logging.getLogger(__name__)

MAX_HALVINGS = 30


@dataclass(frozen=True)
class MdConfig:
    step_size: float = 0.1
    max_iters: int = 5000
    tolerance: float = 1e-8
    init: AssignmentMatrix | None = None
    init_noise: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.step_size <= 0:
            raise ConfigError("step_size must be positive")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")


@dataclass
class MdResult:
    x: AssignmentMatrix
    trace: list[float]
    iterations: int
    converged: bool
    halvings: int = 0
    timed_out: bool = False


def _exp_update(vals: np.ndarray, grad: np.ndarray, step: float) -> np.ndarray | None:
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        logits = -step * grad
        logits -= logits.max(axis=0)
        new = vals * np.exp(logits)
        sums = new.sum(axis=0)
        if not np.all(np.isfinite(new)) or np.any(sums <= 0) or not np.all(np.isfinite(sums)):
            return None
        # columns with a flat gradient are left bit-for-bit as they were
        return np.where(np.any(logits != 0, axis=0), new / sums, vals)


def md_step_values(vals: np.ndarray, grad: np.ndarray, step: float) -> tuple[np.ndarray, float]:
    """One multiplicative update; halves the step on numerical failure.

    Returns the new values and the step actually taken.
    """
    for _ in range(MAX_HALVINGS + 1):
        new = _exp_update(vals, grad, step)
        if new is not None:
            return new, step
        step *= 0.5
    raise StepTooLargeError(f"update still non-finite after {MAX_HALVINGS} halvings")


def md_step(x: AssignmentMatrix, g: WeightedGraph, step: float) -> AssignmentMatrix:
    new, _ = md_step_values(x.values, gradient_f(x, g), step)
    return AssignmentMatrix(new)


def initial_point(k: int, n: int, noise: float, seed: int) -> AssignmentMatrix:
    """Uniform columns plus U[0, noise] jitter, renormalised."""
    rng = np.random.default_rng(seed)
    vals = 1.0 / k + rng.uniform(0.0, noise, size=(k, n))
    return AssignmentMatrix(vals / vals.sum(axis=0))


def solve_md(g: WeightedGraph, k: int, cfg: MdConfig = MdConfig(), deadline: float | None = None) -> MdResult:
    """Iterate mirror descent until the relative change in f drops below tolerance."""
    if k < 2:
        raise ConfigError("k must be >= 2")
    x = cfg.init if cfg.init is not None else initial_point(k, g.node_count, cfg.init_noise, cfg.seed)
    if x.k != k or x.n != g.node_count:
        raise ConfigError(f"initial matrix shape {x.values.shape} does not match ({k}, {g.node_count})")
    w = g.adjacency
    vals = x.values.copy()
    prev = objective_f(x, g)
    trace = [prev]
    halvings = 0
    converged = timed_out = False
    it = 0
    while it < cfg.max_iters:
        grad = 2.0 * (w @ vals.T).T
        vals, taken = md_step_values(vals, grad, cfg.step_size)
        if taken != cfg.step_size:
            halvings += 1
        it += 1
        cur = float(2.0 * (g.edge_w @ np.einsum("ke,ke->e", vals[:, g.edge_u], vals[:, g.edge_v])))
        trace.append(cur)
        if abs(cur - prev) <= cfg.tolerance * max(1.0, abs(prev)):
            converged = True
            break
        prev = cur
        if deadline is not None and time.monotonic() > deadline:
            timed_out = True
            break
    log.debug("md: %d iterations, f=%.6g, converged=%s", it, trace[-1], converged)
    return MdResult(AssignmentMatrix.from_columns(vals), trace, it, converged, halvings, timed_out)
