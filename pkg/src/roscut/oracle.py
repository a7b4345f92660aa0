"""Exhaustive Max-k-Cut for small instances."""
from __future__ import annotations

import numpy as np

from .errors import EnumerationTooLargeError
from .graph import IntegerAssignment, WeightedGraph

BRUTE_FORCE_LIMIT = 10**8
_CHUNK = 1 << 16


def brute_force_oracle(g: WeightedGraph, k: int, limit: int = BRUTE_FORCE_LIMIT) -> tuple[float, IntegerAssignment]:
    """Best cut over all k**N labelings.

    Labelings are visited in lexicographic order (node 0 most significant)
    and the first maximiser wins.
    """
    n = g.node_count
    total = k**n
    if total > limit:
        raise EnumerationTooLargeError(total, limit)
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    best_cut, best_idx = -np.inf, 0
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        labels = (idx[:, None] // powers) % k
        cuts = (labels[:, g.edge_u] != labels[:, g.edge_v]) @ g.edge_w
        i = int(np.argmax(cuts))
        if cuts[i] > best_cut:
            best_cut, best_idx = float(cuts[i]), int(idx[i])
    labels = (best_idx // powers) % k
    return best_cut, IntegerAssignment(labels, k)


def all_optimal_labelings(g: WeightedGraph, k: int, atol: float = 1e-9) -> tuple[float, np.ndarray]:
    """Every labeling attaining the optimum, as an (M, N) array."""
    n = g.node_count
    total = k**n
    if total > 10**7:
        raise EnumerationTooLargeError(total, 10**7)
    powers = k ** np.arange(n - 1, -1, -1, dtype=np.int64)
    labels = (np.arange(total, dtype=np.int64)[:, None] // powers) % k
    cuts = (labels[:, g.edge_u] != labels[:, g.edge_v]) @ g.edge_w
    best = cuts.max()
    return float(best), labels[cuts >= best - atol]
