"""Message-passing network producing simplex columns, with a hand-written backward pass.

Layer ``l`` computes ``Z = Phi1 H + Phi2 (H W)``. Hidden layers then apply
graph normalisation and ReLU; the last layer applies a softmax over the k
rows of each node's column. Internally embeddings are stored node-major
(N x d) so the sparse product ``W @ H`` stays cheap.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NonFiniteError, ShapeError, StaleCacheError
from ..graph import WeightedGraph
from ..relax import AssignmentMatrix, gradient_f, objective_f

NORM_EPS = 1e-5
EMBEDDINGS = ("uniform", "normal")
_generation = itertools.count(1)


@dataclass(frozen=True)
class GnnArchitecture:
    k: int
    layers: int = 2
    input_dim: int = 100
    hidden_dim: int = 100
    activation: str = "relu"
    graph_norm: bool = True
    norm_output: bool = False
    embedding: str = "uniform"

    def __post_init__(self):
        if self.layers < 1 or self.input_dim < 1 or self.hidden_dim < 1:
            raise ConfigError("layers and dimensions must be >= 1")
        if self.k < 2:
            raise ConfigError("k must be >= 2")
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        if self.embedding not in EMBEDDINGS:
            raise ConfigError(f"unknown embedding distribution {self.embedding!r}")

    @property
    def output_dim(self) -> int:
        return self.k

    def dims(self) -> list[int]:
        """Feature widths d_0 .. d_L."""
        return [self.input_dim] + [self.hidden_dim] * (self.layers - 1) + [self.k]

    def normalized(self, layer: int) -> bool:
        """Whether 0-based ``layer`` carries graph normalisation."""
        return self.graph_norm and (layer < self.layers - 1 or self.norm_output)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "layers": self.layers,
            "input_dim": self.input_dim,
            "hidden_dim": self.hidden_dim,
            "activation": self.activation,
            "graph_norm": self.graph_norm,
            "norm_output": self.norm_output,
            "embedding": self.embedding,
        }


@dataclass
class GnnParameters:
    """Trainable arrays, one dict per layer.

    Keys: ``phi1``, ``phi2`` (d_l x d_{l-1}) and, on normalised layers,
    ``gamma``, ``beta``, ``alpha`` (d_l,). ``generation`` changes whenever
    the arrays are replaced, which lets ``backward`` detect stale caches.
    """

    layers: list[dict[str, np.ndarray]]
    generation: int = field(default_factory=lambda: next(_generation))

    KEYS = ("phi1", "phi2", "gamma", "beta", "alpha")

    def arrays(self) -> list[np.ndarray]:
        return [layer[key] for layer in self.layers for key in self.KEYS if key in layer]

    def names(self) -> list[str]:
        return [f"{i}.{key}" for i, layer in enumerate(self.layers) for key in self.KEYS if key in layer]

    def replace(self, arrays: list[np.ndarray]) -> "GnnParameters":
        it = iter(arrays)
        new = [{key: next(it) for key in self.KEYS if key in layer} for layer in self.layers]
        return GnnParameters(new)

    def touch(self) -> None:
        """Mark an in-place modification; invalidates outstanding forward caches."""
        self.generation = next(_generation)

    def copy(self) -> "GnnParameters":
        return self.replace([a.copy() for a in self.arrays()])

    def check(self, arch: GnnArchitecture) -> None:
        dims = arch.dims()
        if len(self.layers) != arch.layers:
            raise ShapeError(f"model has {len(self.layers)} layers, architecture expects {arch.layers}")
        for l, layer in enumerate(self.layers):
            want = (dims[l + 1], dims[l])
            for key in ("phi1", "phi2"):
                if layer[key].shape != want:
                    raise ShapeError(f"layer {l} {key} has shape {layer[key].shape}, expected {want}")
            if arch.normalized(l):
                for key in ("gamma", "beta", "alpha"):
                    if key not in layer or layer[key].shape != (dims[l + 1],):
                        raise ShapeError(f"layer {l} {key} missing or mis-shaped")


def init_parameters(arch: GnnArchitecture, seed: int) -> GnnParameters:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights; norm scale 1, shift 0."""
    rng = np.random.default_rng(seed)
    dims = arch.dims()
    layers = []
    for l in range(arch.layers):
        bound = 1.0 / np.sqrt(dims[l])
        layer = {
            "phi1": rng.uniform(-bound, bound, size=(dims[l + 1], dims[l])),
            "phi2": rng.uniform(-bound, bound, size=(dims[l + 1], dims[l])),
        }
        if arch.normalized(l):
            layer["gamma"] = np.ones(dims[l + 1])
            layer["beta"] = np.zeros(dims[l + 1])
            layer["alpha"] = np.ones(dims[l + 1])
        layers.append(layer)
    return GnnParameters(layers)


def zero_parameters(arch: GnnArchitecture) -> GnnParameters:
    params = init_parameters(arch, 0)
    for layer in params.layers:
        layer["phi1"][:] = 0.0
        layer["phi2"][:] = 0.0
    return params


@dataclass(frozen=True)
class NodeEmbeddings:
    """Fixed random input features, d_0 x N."""

    values: np.ndarray
    seed: int | None = None
    _aggregated: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def aggregated(self, g: WeightedGraph) -> np.ndarray:
        """Neighbor sums ``W @ H0`` (node-major), computed once per graph."""
        hit = self._aggregated.get(id(g))
        if hit is None or hit[0] is not g:
            hit = (g, g.adjacency @ self.values.T)
            self._aggregated[id(g)] = hit
        return hit[1]

    @classmethod
    def random(cls, dim: int, n: int, seed: int, kind: str = "uniform") -> "NodeEmbeddings":
        """i.i.d. U[0, 1) entries, or standard normal with ``kind="normal"``."""
        rng = np.random.default_rng(seed)
        if kind == "normal":
            return cls(rng.standard_normal((dim, n)), seed)
        return cls(rng.random((dim, n)), seed)


@dataclass
class ForwardCache:
    params: GnnParameters
    arch: GnnArchitecture
    generation: int
    layers: list[dict] = field(default_factory=list)
    probs: np.ndarray | None = None


def _norm_forward(z: np.ndarray, layer: dict, entry: dict) -> np.ndarray:
    mu = z.mean(axis=0)
    c = z
    c -= layer["alpha"] * mu  # z is scratch; the centred copy takes its place
    s = np.sqrt(np.einsum("nd,nd->d", c, c) / c.shape[0] + NORM_EPS)
    nh = c
    nh /= s  # c is not needed once scaled; nh * s recovers it in backward
    entry.update(mu=mu, s=s, nh=nh)
    out = nh * layer["gamma"]
    out += layer["beta"]
    return out


def _norm_backward(dy: np.ndarray, layer: dict, entry: dict, grads: dict) -> np.ndarray:
    nh, s = entry["nh"], entry["s"]
    rows = nh.shape[0]
    grads["gamma"] = np.einsum("nd,nd->d", dy, nh)
    grads["beta"] = dy.sum(axis=0)
    dnh = dy * layer["gamma"]
    # d/dc of nh = c / sqrt(mean(c^2) + eps), written in terms of nh
    proj = np.einsum("nd,nd->d", dnh, nh) / rows
    dc = dnh
    dc -= nh * proj
    dc /= s
    dc_sum = dc.sum(axis=0)
    grads["alpha"] = -dc_sum * entry["mu"]
    dc -= layer["alpha"] * dc_sum / rows
    return dc


def forward(
    params: GnnParameters, arch: GnnArchitecture, g: WeightedGraph, h0: NodeEmbeddings
) -> tuple[AssignmentMatrix, ForwardCache]:
    if h0.values.shape != (arch.input_dim, g.node_count):
        raise ShapeError(
            f"embeddings have shape {h0.values.shape}, expected ({arch.input_dim}, {g.node_count})"
        )
    params.check(arch)
    w = g.adjacency
    cache = ForwardCache(params, arch, params.generation)
    h = h0.values.T
    last = arch.layers - 1
    for l, layer in enumerate(params.layers):
        phi1, phi2 = layer["phi1"], layer["phi2"]
        entry = {"h": h}
        z = h @ phi1.T
        if l == 0:
            agg = h0.aggregated(g)
            entry["agg"] = agg
            z += agg @ phi2.T
        elif phi2.shape[0] < phi2.shape[1]:
            # narrowing layer: aggregate after projecting, W (H Phi2^T) == (W H) Phi2^T
            z += w @ (h @ phi2.T)
        else:
            agg = w @ h
            entry["agg"] = agg
            z += agg @ phi2.T
        y = _norm_forward(z, layer, entry) if arch.normalized(l) else z
        if l < last:
            h = np.maximum(y, 0.0, out=y)
            entry["active"] = h
        else:
            e = np.exp(y - y.max(axis=1, keepdims=True))
            h = e / e.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(h)):
            raise NonFiniteError(f"non-finite activations at layer {l + 1}")
        cache.layers.append(entry)
    cache.probs = h
    return AssignmentMatrix(h.T), cache


def backward(cache: ForwardCache, g: WeightedGraph, upstream: np.ndarray) -> list[np.ndarray]:
    """Gradients of the loss w.r.t. ``params.arrays()`` given dLoss/dX (k x N)."""
    params = cache.params
    if params.generation != cache.generation:
        raise StaleCacheError("parameters changed since the forward pass")
    p = cache.probs
    if upstream.shape != p.T.shape:
        raise ShapeError(f"upstream has shape {upstream.shape}, expected {p.T.shape}")
    w = g.adjacency
    up = upstream.T
    last = len(params.layers) - 1
    grads: list[dict[str, np.ndarray]] = [dict() for _ in params.layers]
    for l in range(last, -1, -1):
        layer, entry = params.layers[l], cache.layers[l]
        if l == last:
            dy = p * (up - (p * up).sum(axis=1, keepdims=True))
        else:
            dy = np.multiply(dh, entry["active"] > 0, out=dh)
        dz = _norm_backward(dy, layer, entry, grads[l]) if cache.arch.normalized(l) else dy
        grads[l]["phi1"] = dz.T @ entry["h"]
        narrow = "agg" not in entry
        # W is symmetric, so dz^T (W H) == (W dz)^T H; the cheaper side is used
        wdz = w @ dz if narrow or l > 0 else None
        grads[l]["phi2"] = wdz.T @ entry["h"] if narrow else dz.T @ entry["agg"]
        if l > 0:
            if wdz is None or layer["phi2"].shape[0] > layer["phi2"].shape[1]:
                dh = dz @ layer["phi1"] + w @ (dz @ layer["phi2"])
            else:
                dh = dz @ layer["phi1"] + wdz @ layer["phi2"]
    return [gl[key] for gl, layer in zip(grads, params.layers) for key in GnnParameters.KEYS if key in layer]


def loss_instance(
    params: GnnParameters, arch: GnnArchitecture, g: WeightedGraph, h0: NodeEmbeddings
) -> tuple[float, list[np.ndarray], AssignmentMatrix]:
    """f at the network output, its parameter gradients, and the output itself."""
    x, cache = forward(params, arch, g, h0)
    fval = objective_f(x, g)
    grads = backward(cache, g, gradient_f(x, g))
    return fval, grads, x
