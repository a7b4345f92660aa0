"""Weighted undirected graphs: construction, file formats, generators, cut values."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConfigError,
    DuplicateEdgeError,
    GenerationError,
    GraphFormatError,
    IndexRangeError,
    ShapeError,
)

log = logging.getLogger(__name__)

REGULAR_RETRY_BUDGET = 10_000


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Symmetric signed-weight graph with zero diagonal.

    Each unordered edge is stored once with ``u < v``. The arrays are
    treated as read-only; derived structures are cached on first use.
    """

    node_count: int
    edge_u: np.ndarray
    edge_v: np.ndarray
    edge_w: np.ndarray
    collapsed_duplicates: int = field(default=0)
    name: str = field(default="")

    def __post_init__(self):
        if self.node_count < 1:
            raise ShapeError("graph needs at least one node")
        u = np.asarray(self.edge_u, dtype=np.int64)
        v = np.asarray(self.edge_v, dtype=np.int64)
        w = np.asarray(self.edge_w, dtype=np.float64)
        if not (u.shape == v.shape == w.shape) or u.ndim != 1:
            raise ShapeError("edge arrays must be 1-d and of equal length")
        if np.any(u >= v):
            raise GraphFormatError("edges must satisfy u < v (no self-loops)")
        if u.size and (u.min() < 0 or v.max() >= self.node_count):
            raise IndexRangeError("edge endpoint outside [0, node_count)")
        for arr in (u, v, w):
            arr.setflags(write=False)
        object.__setattr__(self, "edge_u", u)
        object.__setattr__(self, "edge_v", v)
        object.__setattr__(self, "edge_w", w)

    @classmethod
    def from_edges(
        cls, node_count: int, edges: Iterable[tuple[int, int, float]], name: str = ""
    ) -> "WeightedGraph":
        """Build from ``(i, j, w)`` triples; orientation is normalised, duplicates rejected."""
        triples = list(edges)
        seen: set[tuple[int, int]] = set()
        us, vs, ws = [], [], []
        for i, j, w in triples:
            if i == j:
                raise GraphFormatError(f"self-loop at node {i}")
            a, b = (i, j) if i < j else (j, i)
            if (a, b) in seen:
                raise DuplicateEdgeError(f"duplicate edge ({a}, {b})")
            seen.add((a, b))
            us.append(a)
            vs.append(b)
            ws.append(float(w))
        return cls(node_count, np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                   np.array(ws, dtype=np.float64), name=name)

    @property
    def edge_count(self) -> int:
        return int(self.edge_u.size)

    @property
    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(a), int(b), float(c)) for a, b, c in zip(self.edge_u, self.edge_v, self.edge_w)]

    @cached_property
    def total_edge_weight(self) -> float:
        return float(self.edge_w.sum())

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """The matrix W as CSR (both orientations present)."""
        n = self.node_count
        rows = np.concatenate([self.edge_u, self.edge_v])
        cols = np.concatenate([self.edge_v, self.edge_u])
        data = np.concatenate([self.edge_w, self.edge_w])
        mat = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        mat.sort_indices()
        return mat

    def neighbors(self, i: int) -> list[tuple[int, float]]:
        adj = self.adjacency
        lo, hi = adj.indptr[i], adj.indptr[i + 1]
        return [(int(j), float(w)) for j, w in zip(adj.indices[lo:hi], adj.data[lo:hi])]

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.edge_u, self.edge_v]), minlength=self.node_count)

    def with_weights(self, weights: np.ndarray) -> "WeightedGraph":
        return WeightedGraph(self.node_count, self.edge_u, self.edge_v, np.asarray(weights, dtype=np.float64),
                             name=self.name)


@dataclass(frozen=True)
class IntegerAssignment:
    """One label in ``[0, k)`` per node."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ShapeError("labels must be a 1-d array")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if labels.size and (labels.min() < 0 or labels.max() >= self.k):
            raise ShapeError(f"labels must lie in [0, {self.k})")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    def one_hot(self) -> np.ndarray:
        out = np.zeros((self.k, self.labels.size))
        out[self.labels, np.arange(self.labels.size)] = 1.0
        return out


def _lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line:
            yield lineno, line


def _int(tok: str, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise GraphFormatError(f"expected integer, got {tok!r}", lineno) from None


def _float(tok: str, lineno: int) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise GraphFormatError(f"expected number, got {tok!r}", lineno) from None
    if not np.isfinite(val):
        raise GraphFormatError(f"non-finite weight {tok!r}", lineno)
    return val


def parse_gset(text: str, name: str = "") -> WeightedGraph:
    """Parse the Gset format: ``N M`` header then ``M`` lines ``i j w`` (1-based)."""
    lines = list(_lines(text))
    if not lines:
        raise GraphFormatError("empty input", 1)
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise GraphFormatError("header must be 'N M'", lineno)
    n, m = _int(parts[0], lineno), _int(parts[1], lineno)
    if n < 1 or m < 0:
        raise GraphFormatError("N must be positive and M non-negative", lineno)
    body = lines[1:]
    if len(body) != m:
        where = body[m][0] if len(body) > m else (body[-1][0] if body else lineno)
        raise GraphFormatError(f"header announces {m} edges, found {len(body)}", where)
    us = np.empty(m, dtype=np.int64)
    vs = np.empty(m, dtype=np.int64)
    ws = np.empty(m, dtype=np.float64)
    seen: set[tuple[int, int]] = set()
    for idx, (ln, line) in enumerate(body):
        toks = line.split()
        if len(toks) != 3:
            raise GraphFormatError("edge line must be 'i j w'", ln)
        i, j, w = _int(toks[0], ln), _int(toks[1], ln), _float(toks[2], ln)
        if not (1 <= i <= n and 1 <= j <= n):
            raise IndexRangeError(f"node index outside [1, {n}]", ln)
        if i == j:
            raise GraphFormatError(f"self-loop at node {i}", ln)
        a, b = (i - 1, j - 1) if i < j else (j - 1, i - 1)
        if (a, b) in seen:
            raise DuplicateEdgeError(f"duplicate edge {i} {j}", ln)
        seen.add((a, b))
        us[idx], vs[idx], ws[idx] = a, b, w
    return WeightedGraph(n, us, vs, ws, name=name)


def parse_dimacs_color(text: str, name: str = "") -> WeightedGraph:
    """Parse DIMACS ``.col`` files into a unit-weight graph.

    Repeated ``e i j`` / ``e j i`` lines are collapsed; the number dropped
    is kept in ``collapsed_duplicates``.
    """
    n = None
    seen: dict[tuple[int, int], None] = {}
    dropped = 0
    for ln, line in _lines(text):
        toks = line.split()
        tag = toks[0]
        if tag == "c":
            continue
        if tag == "p":
            if n is not None:
                raise GraphFormatError("second problem line", ln)
            if len(toks) != 4:
                raise GraphFormatError("problem line must be 'p edge N M'", ln)
            if toks[1] != "edge":
                raise GraphFormatError(f"unsupported problem type {toks[1]!r}", ln)
            n = _int(toks[2], ln)
            _int(toks[3], ln)
            if n < 1:
                raise GraphFormatError("N must be positive", ln)
        elif tag == "e":
            if n is None:
                raise GraphFormatError("edge before 'p edge' header", ln)
            if len(toks) != 3:
                raise GraphFormatError("edge line must be 'e i j'", ln)
            i, j = _int(toks[1], ln), _int(toks[2], ln)
            if not (1 <= i <= n and 1 <= j <= n):
                raise IndexRangeError(f"node index outside [1, {n}]", ln)
            if i == j:
                raise GraphFormatError(f"self-loop at node {i}", ln)
            key = (i - 1, j - 1) if i < j else (j - 1, i - 1)
            if key in seen:
                dropped += 1
            else:
                seen[key] = None
        else:
            raise GraphFormatError(f"unknown line type {tag!r}", ln)
    if n is None:
        raise GraphFormatError("missing 'p edge' header")
    if dropped:
        log.warning("collapsed %d repeated DIMACS edges", dropped)
    keys = np.array(list(seen), dtype=np.int64).reshape(-1, 2)
    return WeightedGraph(n, keys[:, 0], keys[:, 1], np.ones(len(keys)),
                         collapsed_duplicates=dropped, name=name)


def parse_edge_list(text: str, name: str = "") -> WeightedGraph:
    """Parse 0-based ``i j w`` lines; node count is ``max index + 1``.

    Commas are accepted as separators and columns past the third are
    ignored, so signed rating dumps (``source,target,rating,time``) load
    directly. Lines starting with ``#`` or ``%`` are comments.
    """
    weights: dict[tuple[int, int], float] = {}
    dropped = 0
    top = -1
    for ln, line in _lines(text):
        if line[0] in "#%":
            continue
        toks = line.replace(",", " ").split()
        if len(toks) < 3:
            raise GraphFormatError("edge line must be 'i j w'", ln)
        i, j, w = _int(toks[0], ln), _int(toks[1], ln), _float(toks[2], ln)
        if i < 0 or j < 0:
            raise IndexRangeError("negative node index", ln)
        if i == j:
            raise GraphFormatError(f"self-loop at node {i}", ln)
        key = (i, j) if i < j else (j, i)
        if key in weights:
            if weights[key] != w:
                raise DuplicateEdgeError(f"conflicting weights for edge {key}: {weights[key]} vs {w}", ln)
            dropped += 1
            continue
        weights[key] = w
        top = max(top, i, j)
    if not weights:
        raise GraphFormatError("no edges in input")
    keys = np.array(list(weights), dtype=np.int64)
    return WeightedGraph(top + 1, keys[:, 0], keys[:, 1], np.fromiter(weights.values(), dtype=np.float64),
                         collapsed_duplicates=dropped, name=name)


PARSERS = {"gset": parse_gset, "dimacs": parse_dimacs_color, "edgelist": parse_edge_list}


def _fmt_weight(w: float) -> str:
    if float(w).is_integer() and abs(w) < 2**53:
        return str(int(w))
    return repr(float(w))


def serialize_gset(g: WeightedGraph) -> str:
    out = [f"{g.node_count} {g.edge_count}"]
    out.extend(f"{a + 1} {b + 1} {_fmt_weight(c)}" for a, b, c in zip(g.edge_u, g.edge_v, g.edge_w))
    return "\n".join(out) + "\n"


def generate_random_regular(n: int, r: int, seed: int, max_attempts: int = REGULAR_RETRY_BUDGET) -> WeightedGraph:
    """Uniform simple r-regular graph via the pairing model with full rejection."""
    if n < 1 or r < 0:
        raise ConfigError("n must be positive and r non-negative")
    if (n * r) % 2:
        raise ConfigError(f"n*r must be even (n={n}, r={r})")
    if r >= n:
        raise ConfigError(f"degree r={r} must be smaller than n={n}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(n, dtype=np.int64), r)
    for _ in range(max_attempts):
        pairs = rng.permutation(stubs).reshape(-1, 2)
        a, b = pairs.min(axis=1), pairs.max(axis=1)
        if np.any(a == b):
            continue
        key = a * n + b
        order = np.argsort(key, kind="stable")
        skey = key[order]
        if np.any(skey[1:] == skey[:-1]):
            continue
        return WeightedGraph(n, a[order], b[order], np.ones(a.size), name=f"regular_n{n}_r{r}_s{seed}")
    raise GenerationError(f"no simple {r}-regular pairing on {n} nodes after {max_attempts} attempts")


def perturb_weights(g: WeightedGraph, low: float, high: float, seed: int) -> WeightedGraph:
    """Multiply every edge weight by an independent draw from U[low, high]."""
    if low > high:
        raise ConfigError(f"low={low} exceeds high={high}")
    rng = np.random.default_rng(seed)
    sigma = rng.uniform(low, high, size=g.edge_count)
    return g.with_weights(g.edge_w * sigma)


def cut_value(g: WeightedGraph, a: IntegerAssignment) -> float:
    """Total weight of edges whose endpoints carry different labels."""
    if a.labels.size != g.node_count:
        raise ShapeError(f"assignment has {a.labels.size} labels for {g.node_count} nodes")
    crossing = a.labels[g.edge_u] != a.labels[g.edge_v]
    return float(g.edge_w[crossing].sum())


def same_label_weight(g: WeightedGraph, labels: np.ndarray) -> np.ndarray:
    """Weight on monochromatic edges; ``labels`` may be (N,) or a (T, N) batch."""
    labels = np.asarray(labels)
    same = labels[..., g.edge_u] == labels[..., g.edge_v]
    return same @ g.edge_w
