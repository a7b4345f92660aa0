"""The simplex-product relaxation: objective, gradient and support neighborhoods."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSupportError,
    EnumerationTooLargeError,
    InfeasibleError,
    ShapeError,
)
from .graph import IntegerAssignment, WeightedGraph

SUPPORT_TOL = 1e-8
RENORM_TOL = 1e-6
FEAS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class AssignmentMatrix:
    """A k x N matrix whose columns lie on the probability simplex."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ShapeError(f"expected a non-empty k x N matrix, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InfeasibleError("matrix has non-finite entries")
        if vals.min() < 0:
            raise InfeasibleError(f"negative entry {vals.min():.3g}")
        dev = np.abs(vals.sum(axis=0) - 1.0).max()
        if dev > FEAS_TOL:
            raise InfeasibleError(f"column sums deviate from 1 by {dev:.3g}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_columns(cls, values, strict: bool = False) -> "AssignmentMatrix":
        """Build from nonnegative columns, renormalising sums within 1e-6 of one.

        With ``strict`` any deviation beyond 1e-9 is rejected instead.
        """
        vals = np.array(values, dtype=np.float64)
        if vals.ndim != 2:
            raise ShapeError(f"expected 2-d array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise InfeasibleError("matrix has non-finite entries")
        if vals.min() < 0:
            raise InfeasibleError(f"negative entry {vals.min():.3g}")
        sums = vals.sum(axis=0)
        dev = np.abs(sums - 1.0).max()
        limit = FEAS_TOL if strict else RENORM_TOL
        if dev > limit:
            raise InfeasibleError(f"column sums deviate from 1 by {dev:.3g} (limit {limit:g})")
        return cls(vals / sums)

    @classmethod
    def uniform(cls, k: int, n: int) -> "AssignmentMatrix":
        return cls(np.full((k, n), 1.0 / k))

    @classmethod
    def from_labels(cls, a: IntegerAssignment) -> "AssignmentMatrix":
        return cls(a.one_hot())

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def argmax_labels(self) -> IntegerAssignment:
        return IntegerAssignment(self.values.argmax(axis=0), max(self.k, 2))

    def to_text(self) -> str:
        rows = [f"{self.k} {self.n}"]
        rows.extend(" ".join(repr(float(p)) for p in col) for col in self.values.T)
        return "\n".join(rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "AssignmentMatrix":
        lines = [ln.split() for ln in text.splitlines() if ln.strip()]
        k, n = int(lines[0][0]), int(lines[0][1])
        cols = np.array([[float(t) for t in ln] for ln in lines[1:]], dtype=np.float64)
        if cols.shape != (n, k):
            raise ShapeError(f"expected {n} rows of {k} probabilities, got {cols.shape}")
        return cls.from_columns(cols.T)


@dataclass(frozen=True)
class SupportPattern:
    sets: tuple[tuple[int, ...], ...]
    tol: float

    def sizes(self) -> list[int]:
        return [len(s) for s in self.sets]


def _check(x: AssignmentMatrix, g: WeightedGraph):
    if x.n != g.node_count:
        raise ShapeError(f"matrix has {x.n} columns, graph has {g.node_count} nodes")


def objective_f(x: AssignmentMatrix, g: WeightedGraph) -> float:
    """Tr(X W X^T), accumulated edge by edge."""
    _check(x, g)
    vals = x.values
    inner = np.einsum("ke,ke->e", vals[:, g.edge_u], vals[:, g.edge_v])
    return float(2.0 * (g.edge_w @ inner))


def gradient_f(x: AssignmentMatrix, g: WeightedGraph) -> np.ndarray:
    """2 X W as a k x N array."""
    _check(x, g)
    return 2.0 * (g.adjacency @ x.values.T).T


def cut_from_objective(g: WeightedGraph, fval: float) -> float:
    return g.total_edge_weight - fval / 2.0


def support_pattern(x: AssignmentMatrix, tol: float = SUPPORT_TOL) -> SupportPattern:
    if tol < 0:
        raise ValueError("tol must be non-negative")
    mask = x.values > tol
    empty = np.flatnonzero(~mask.any(axis=0))
    if empty.size:
        raise DegenerateSupportError(f"column {int(empty[0])} has empty support at tol={tol:g}")
    return SupportPattern(tuple(tuple(np.flatnonzero(col).tolist()) for col in mask.T), tol)


def neighborhood_contains(anchor: AssignmentMatrix, x: AssignmentMatrix, tol: float = SUPPORT_TOL) -> bool:
    """Whether every column of ``x`` keeps its mass on the anchor's support."""
    if anchor.values.shape != x.values.shape:
        raise ShapeError(f"shape mismatch {anchor.values.shape} vs {x.values.shape}")
    mask = anchor.values > tol
    mass = np.where(mask, x.values, 0.0).sum(axis=0)
    return bool(np.all(mass >= 1.0 - tol))


def neighborhood_size(pattern: SupportPattern, cap: int | None = None) -> int:
    """Product of support sizes; stops early once it exceeds ``cap``."""
    total = 1
    for s in pattern.sets:
        total *= len(s)
        if cap is not None and total > cap:
            return total
    return total


def enumerate_integer_neighborhood(
    anchor: AssignmentMatrix, cap: int = 1_000_000, tol: float = SUPPORT_TOL
) -> list[IntegerAssignment]:
    """All labelings that pick one support index per column."""
    pattern = support_pattern(anchor, tol)
    size = neighborhood_size(pattern, cap)
    if size > cap:
        raise EnumerationTooLargeError(size, cap)
    k = max(anchor.k, 2)
    return [IntegerAssignment(np.array(combo, dtype=np.int64), k) for combo in itertools.product(*pattern.sets)]


def sample_neighborhood(anchor: AssignmentMatrix, rng: np.random.Generator, tol: float = SUPPORT_TOL) -> np.ndarray:
    """Uniform (flat Dirichlet) draw from the face spanned by the anchor's support."""
    mask = anchor.values > tol
    draws = rng.standard_exponential(anchor.values.shape) * mask
    return draws / draws.sum(axis=0)


def verify_basin(
    anchor: AssignmentMatrix,
    g: WeightedGraph,
    samples: int = 100,
    seed: int = 0,
    tol: float = 1e-9,
    support_tol: float = SUPPORT_TOL,
) -> tuple[bool, float]:
    """Check that f is constant over random points of the anchor's neighborhood.

    Returns ``(ok, max_deviation)``. Meant for tests and diagnostics.
    """
    _check(anchor, g)
    support_pattern(anchor, support_tol)
    rng = np.random.default_rng(seed)
    ref = objective_f(anchor, g)
    worst = 0.0
    for _ in range(samples):
        pt = AssignmentMatrix(sample_neighborhood(anchor, rng, support_tol))
        worst = max(worst, abs(objective_f(pt, g) - ref))
    return worst <= tol, worst
