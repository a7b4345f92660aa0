"""Categorical decoding of relaxed solutions into integer labelings."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .graph import IntegerAssignment, WeightedGraph, same_label_weight
from .relax import AssignmentMatrix, cut_from_objective, objective_f


@dataclass(frozen=True)
class SampleConfig:
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")


def _draw_labels(values: np.ndarray, u: np.ndarray) -> np.ndarray:
    # inverse CDF per column; mass missing from the last cdf entry falls to index k-1
    cdf = np.cumsum(values, axis=0)[:-1]
    return (u[..., None, :] >= cdf).sum(axis=-2)


def sample_once(x: AssignmentMatrix, rng: np.random.Generator) -> IntegerAssignment:
    """Draw node i's label from Cat(x[:, i]), nodes consumed in index order."""
    u = rng.random(x.n)
    return IntegerAssignment(_draw_labels(x.values, u), max(x.k, 2))


def sample_batch(x: AssignmentMatrix, trials: int, rng: np.random.Generator) -> np.ndarray:
    """``trials`` independent labelings as a (trials, N) array.

    Consumes the stream exactly as ``trials`` sequential ``sample_once`` calls.
    """
    u = rng.random((trials, x.n))
    return _draw_labels(x.values, u)


def labeling_objective(g: WeightedGraph, labels: np.ndarray) -> np.ndarray:
    """f at one-hot points: twice the monochromatic weight."""
    return 2.0 * same_label_weight(g, labels)


def sample_best_of(
    x: AssignmentMatrix, g: WeightedGraph, cfg: SampleConfig
) -> tuple[IntegerAssignment, float, float]:
    """Run the sampler ``cfg.trials`` times and keep the lowest-f labeling.

    Ties go to the earliest trial. Returns ``(labeling, f, cut)``.
    """
    if x.n != g.node_count:
        raise ShapeError(f"matrix has {x.n} columns, graph has {g.node_count} nodes")
    rng = np.random.default_rng(cfg.seed)
    best_labels, best_f = None, np.inf
    # chunk to bound memory on large graphs; stream order is unchanged
    chunk = max(1, min(cfg.trials, 4_000_000 // max(x.n * x.k, 1)))
    done = 0
    while done < cfg.trials:
        t = min(chunk, cfg.trials - done)
        labels = sample_batch(x, t, rng)
        fs = labeling_objective(g, labels)
        i = int(np.argmin(fs))
        if fs[i] < best_f:
            best_f, best_labels = float(fs[i]), labels[i]
        done += t
    return IntegerAssignment(best_labels, max(x.k, 2)), best_f, cut_from_objective(g, best_f)


def expected_objective(x: AssignmentMatrix, g: WeightedGraph) -> float:
    """E[f] under independent categorical sampling.

    Computed from pairwise agreement probabilities P(label_i == label_j) =
    <x_i, x_j>, kept apart from ``objective_f`` so the two can be checked
    against each other.
    """
    if x.n != g.node_count:
        raise ShapeError(f"matrix has {x.n} columns, graph has {g.node_count} nodes")
    total = 0.0
    vals = x.values
    for u, v, w in zip(g.edge_u, g.edge_v, g.edge_w):
        total += 2.0 * w * float(np.dot(vals[:, u], vals[:, v]))
    return total


def monte_carlo_expectation_test(
    x: AssignmentMatrix, g: WeightedGraph, draws: int = 20_000, seed: int = 0
) -> tuple[float, float, bool]:
    """Empirical mean of f over ``draws`` samples against ``expected_objective``.

    Passes when the gap is within four standard errors, plus a 1e-9
    relative floor for the zero-variance case.
    """
    if draws < 1000:
        raise ConfigError("draws must be >= 1000")
    rng = np.random.default_rng(seed)
    fs = labeling_objective(g, sample_batch(x, draws, rng))
    mean = float(fs.mean())
    stderr = float(fs.std(ddof=1) / np.sqrt(draws))
    target = expected_objective(x, g)
    ok = abs(mean - target) <= 4.0 * stderr + 1e-9 * max(1.0, abs(target))
    return mean, stderr, ok


def objective_identity_gap(x: AssignmentMatrix, g: WeightedGraph) -> float:
    """Relative gap between ``expected_objective`` and ``objective_f``."""
    a, b = expected_objective(x, g), objective_f(x, g)
    return abs(a - b) / max(1.0, abs(b))
