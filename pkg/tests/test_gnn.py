import numpy as np
import pytest

from roscut.errors import ConfigError, NonFiniteError, ShapeError, StaleCacheError
from roscut.graph import WeightedGraph, generate_random_regular, parse_gset
from roscut.gnn.model import (
    GnnArchitecture,
    NodeEmbeddings,
    backward,
    forward,
    init_parameters,
    loss_instance,
    zero_parameters,
)
from roscut.gnn.train import TrainConfig, finetune, pretrain
from roscut.oracle import brute_force_oracle
from roscut.relax import AssignmentMatrix, gradient_f, objective_f
from roscut.sampling import SampleConfig, sample_best_of

TRIANGLE = "3 3\n1 2 1\n1 3 1\n2 3 1"
K4 = "4 6\n1 2 1\n1 3 1\n1 4 1\n2 3 1\n2 4 1\n3 4 1"


def random_graph(rng, n, p=0.5):
    edges = [(i, j, float(rng.uniform(-2, 2))) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return WeightedGraph.from_edges(n, edges)


def small_setup(seed, norm_output=False):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 11))
    arch = GnnArchitecture(k=int(rng.integers(2, 5)), input_dim=int(rng.integers(2, 9)),
                           hidden_dim=int(rng.integers(2, 9)), norm_output=norm_output)
    params = init_parameters(arch, seed)
    # move the norm parameters off their initial values so every group gets a generic gradient
    for layer in params.layers:
        for key in ("gamma", "beta", "alpha"):
            if key in layer:
                layer[key] = layer[key] + rng.uniform(-0.5, 0.5, layer[key].shape)
    params.touch()
    h0 = NodeEmbeddings(rng.standard_normal((arch.input_dim, n)))
    return random_graph(rng, n), arch, params, h0


def test_architecture_validation():
    for kw in ({"layers": 0}, {"k": 1}, {"activation": "tanh"}, {"embedding": "sphere"}):
        with pytest.raises(ConfigError):
            GnnArchitecture(**{"k": 2, **kw})
    assert GnnArchitecture(k=3).dims() == [100, 100, 3]


def test_zero_parameters_give_uniform_columns():
    arch = GnnArchitecture(k=3, input_dim=4, hidden_dim=5)
    g = parse_gset(TRIANGLE)
    x, _ = forward(zero_parameters(arch), arch, g, NodeEmbeddings.random(4, 3, 0))
    assert np.allclose(x.values, 1 / 3, atol=1e-15)


def test_isolated_node_uses_only_self_term():
    arch = GnnArchitecture(k=2, input_dim=3, hidden_dim=4, graph_norm=False)
    params = init_parameters(arch, 1)
    h0 = NodeEmbeddings.random(3, 1, 2)
    x, _ = forward(params, arch, parse_gset("1 0"), h0)
    for layer in params.layers:
        layer["phi2"] = np.full_like(layer["phi2"], 7.0)
    params.touch()
    y, _ = forward(params, arch, parse_gset("1 0"), h0)
    assert np.array_equal(x.values, y.values)


def test_symmetric_triangle_columns_identical():
    arch = GnnArchitecture(k=3, input_dim=5, hidden_dim=6)
    col = np.random.default_rng(0).random((5, 1))
    h0 = NodeEmbeddings(np.repeat(col, 3, axis=1))
    x, _ = forward(init_parameters(arch, 4), arch, parse_gset(TRIANGLE), h0)
    assert np.allclose(x.values, x.values[:, :1], atol=1e-12)


def test_symmetric_triangle_gradients_respect_automorphism():
    # swapping nodes 1 and 2 (with their embeddings) leaves the loss and every gradient unchanged
    arch = GnnArchitecture(k=2, input_dim=4, hidden_dim=4)
    rng = np.random.default_rng(5)
    h = rng.random((4, 3))
    params = init_parameters(arch, 6)
    g = parse_gset(TRIANGLE)
    f1, g1, _ = loss_instance(params, arch, g, NodeEmbeddings(h))
    f2, g2, _ = loss_instance(params, arch, g, NodeEmbeddings(h[:, [0, 2, 1]]))
    assert f1 == pytest.approx(f2, rel=1e-12)
    for a, b in zip(g1, g2):
        assert np.allclose(a, b, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_output_feasible(seed):
    g, arch, params, h0 = small_setup(seed)
    x, _ = forward(params, arch, g, h0)
    assert np.all(x.values >= 0)
    assert np.allclose(x.values.sum(axis=0), 1, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_permutation_equivariance(seed):
    g, arch, params, h0 = small_setup(seed)
    perm = np.random.default_rng(seed + 100).permutation(g.node_count)
    inv = np.argsort(perm)
    # node i of the relabelled graph is old node perm[i]
    pg = WeightedGraph.from_edges(g.node_count, [(int(inv[u]), int(inv[v]), w) for u, v, w in g.edges])
    x, _ = forward(params, arch, g, h0)
    y, _ = forward(params, arch, pg, NodeEmbeddings(h0.values[:, perm]))
    assert np.allclose(y.values, x.values[:, perm], rtol=1e-10, atol=1e-12)


def test_forward_shape_errors():
    arch = GnnArchitecture(k=2, input_dim=3, hidden_dim=3)
    with pytest.raises(ShapeError):
        forward(init_parameters(arch, 0), arch, parse_gset(TRIANGLE), NodeEmbeddings.random(4, 3, 0))
    other = GnnArchitecture(k=3, input_dim=3, hidden_dim=3)
    with pytest.raises(ShapeError):
        forward(init_parameters(other, 0), arch, parse_gset(TRIANGLE), NodeEmbeddings.random(3, 3, 0))


def test_forward_reports_non_finite_layer():
    arch = GnnArchitecture(k=2, input_dim=2, hidden_dim=2, graph_norm=False)
    params = init_parameters(arch, 0)
    params.layers[0]["phi1"][0, 0] = np.nan
    params.touch()
    with pytest.raises(NonFiniteError, match="layer 1"):
        forward(params, arch, parse_gset(TRIANGLE), NodeEmbeddings.random(2, 3, 0))


def numeric_gradient(params, arch, g, h0, block, h=1e-4):
    arrays = [a.copy() for a in params.arrays()]
    out = np.zeros_like(arrays[block])
    for idx in np.ndindex(out.shape):
        vals = []
        for sign in (1, -1):
            trial = [a.copy() for a in arrays]
            trial[block][idx] += sign * h
            x, _ = forward(params.replace(trial), arch, g, h0)
            vals.append(objective_f(x, g))
        out[idx] = (vals[0] - vals[1]) / (2 * h)
    return out


def backward_rel_error(seed, norm_output=False):
    g, arch, params, h0 = small_setup(seed, norm_output)
    _, grads, _ = loss_instance(params, arch, g, h0)
    worst = 0.0
    names = params.names()
    for b in range(len(grads)):
        fd = numeric_gradient(params, arch, g, h0, b)
        scale = max(np.linalg.norm(fd), np.linalg.norm(grads[b]), 1e-8)
        worst = max(worst, float(np.linalg.norm(grads[b] - fd) / scale))
    return worst, names


@pytest.mark.parametrize("seed", range(10))
def test_backward_matches_finite_differences(seed):
    worst, names = backward_rel_error(seed, norm_output=seed % 3 == 0)
    assert {"0.phi1", "0.phi2", "0.gamma", "0.beta", "0.alpha", "1.phi1", "1.phi2"} <= set(names)
    assert worst < 1e-4


def test_zero_upstream_gives_zero_gradients():
    g, arch, params, h0 = small_setup(2)
    _, cache = forward(params, arch, g, h0)
    assert all(not a.any() for a in backward(cache, g, np.zeros((arch.k, g.node_count))))


def test_stale_cache_rejected():
    g, arch, params, h0 = small_setup(3)
    x, cache = forward(params, arch, g, h0)
    params.layers[0]["phi1"] += 1.0
    params.touch()
    with pytest.raises(StaleCacheError):
        backward(cache, g, gradient_f(x, g))


def test_loss_examples():
    arch = GnnArchitecture(k=2, input_dim=3, hidden_dim=3)
    g = parse_gset(TRIANGLE)
    f, _, _ = loss_instance(zero_parameters(arch), arch, g, NodeEmbeddings.random(3, 3, 0))
    assert f == pytest.approx(3.0, abs=1e-12)
    empty = parse_gset("4 0")
    f, grads, _ = loss_instance(init_parameters(arch, 1), arch, empty, NodeEmbeddings.random(3, 4, 0))
    assert f == 0 and all(not a.any() for a in grads)
    g2, arch2, params, h0 = small_setup(7)
    f, _, x = loss_instance(params, arch2, g2, h0)
    assert f == pytest.approx(objective_f(x, g2), rel=1e-12, abs=1e-12)


def test_finetune_no_edges_stops_after_patience():
    arch = GnnArchitecture(k=2, input_dim=4, hidden_dim=4)
    res = finetune(init_parameters(arch, 0), arch, parse_gset("5 0"), TrainConfig(patience=100))
    assert res.iterations == 100
    assert res.stopped_early and res.best_f == 0


@pytest.mark.parametrize("seed", range(3))
def test_finetune_triangle(seed):
    arch = GnnArchitecture(k=2)
    g = parse_gset(TRIANGLE)
    res = finetune(init_parameters(arch, seed), arch, g, TrainConfig(seed=seed))
    assert res.stopped_early
    assert sample_best_of(res.x, g, SampleConfig(100, seed))[2] == 2


def test_finetune_k4_three_colours():
    # a saturated softmax can park the output on a 2+2 split (cut 4) before early stopping
    # fires, so the optimum is asserted for most seeds rather than every one
    arch = GnnArchitecture(k=3)
    g = parse_gset(K4)
    best, _ = brute_force_oracle(g, 3)
    assert best == 5  # four nodes, three labels: exactly one edge stays uncut
    cuts = []
    for seed in range(12):
        res = finetune(init_parameters(arch, seed), arch, g, TrainConfig(seed=seed))
        assert res.stopped_early
        cuts.append(sample_best_of(res.x, g, SampleConfig(100, seed))[2])
    assert set(cuts) <= {4.0, 5.0}
    assert cuts.count(5.0) >= 9


def test_finetune_returns_best_iterate():
    g = generate_random_regular(40, 3, seed=1)
    arch = GnnArchitecture(k=2, input_dim=16, hidden_dim=16)
    res = finetune(init_parameters(arch, 2), arch, g, TrainConfig(seed=2))
    assert res.best_f == min(res.trace)
    assert objective_f(res.x, g) == pytest.approx(res.best_f, rel=1e-12)
    assert res.iterations < TrainConfig().max_finetune_iters


def test_pretrain_on_edgeless_graphs_is_a_no_op():
    arch = GnnArchitecture(k=2, input_dim=3, hidden_dim=3)
    res = pretrain([parse_gset("4 0"), parse_gset("3 0")], arch, TrainConfig(seed=1))
    for a, b in zip(res.params.arrays(), res.initial_params.arrays()):
        assert np.array_equal(a, b)


def test_pretrain_empty_dataset():
    with pytest.raises(ConfigError):
        pretrain([], GnnArchitecture(k=2))


def test_pretrain_reduces_loss_and_replays():
    arch = GnnArchitecture(k=2, input_dim=16, hidden_dim=16)
    data = [generate_random_regular(30, 3, seed=s) for s in range(40)]
    cfg = TrainConfig(seed=3)
    res = pretrain(data, arch, cfg)
    again = pretrain(data, arch, cfg)
    for a, b in zip(res.params.arrays(), again.params.arrays()):
        assert np.array_equal(a, b)
    rng = np.random.default_rng(0)

    def mean_f(params):
        out = []
        for g in data:
            h0 = NodeEmbeddings(rng.random((16, g.node_count)))
            out.append(objective_f(forward(params, arch, g, h0)[0], g))
        return np.mean(out)

    assert mean_f(res.params) < mean_f(res.initial_params)


def test_embeddings_are_seeded():
    a = NodeEmbeddings.random(4, 6, 3)
    assert np.array_equal(a.values, NodeEmbeddings.random(4, 6, 3).values)
    assert a.values.min() >= 0 and a.values.max() < 1
    assert NodeEmbeddings.random(4, 6, 3, "normal").values.min() < 0
