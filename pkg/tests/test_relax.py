import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roscut.errors import (
    DegenerateSupportError,
    EnumerationTooLargeError,
    InfeasibleError,
    ShapeError,
)
from roscut.graph import IntegerAssignment, WeightedGraph, cut_value, parse_gset
from roscut.relax import (
    AssignmentMatrix,
    cut_from_objective,
    enumerate_integer_neighborhood,
    gradient_f,
    neighborhood_contains,
    objective_f,
    support_pattern,
    verify_basin,
)

P = 0.3


@pytest.fixture
def triangle():
    return parse_gset("3 3\n1 2 1\n1 3 1\n2 3 1")


def x_star(p=P):
    return AssignmentMatrix(np.array([[p, 1.0, 0.0], [1 - p, 0.0, 1.0]]))


def dense_objective(x, g):
    # independent oracle: build W densely and take the trace
    w = np.zeros((g.node_count, g.node_count))
    for u, v, c in g.edges:
        w[u, v] = w[v, u] = c
    return float(np.trace(x @ w @ x.T))


def random_graph(rng, n, p=0.5, low=-5.0, high=5.0):
    edges = [(i, j, float(rng.uniform(low, high))) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return WeightedGraph.from_edges(n, edges)


def random_simplex(rng, k, n):
    vals = rng.random((k, n)) + 1e-3
    return AssignmentMatrix(vals / vals.sum(axis=0))


def test_objective_examples(triangle):
    assert objective_f(x_star(), triangle) == pytest.approx(2.0, abs=1e-12)
    assert objective_f(AssignmentMatrix.uniform(2, 3), triangle) == pytest.approx(3.0, abs=1e-12)
    assert objective_f(AssignmentMatrix(np.ones((1, 3))), triangle) == pytest.approx(2 * 3)


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_objective_matches_dense_trace(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(1, 12)))
    x = random_simplex(rng, int(rng.integers(1, 5)), g.node_count)
    assert objective_f(x, g) == pytest.approx(dense_objective(x.values, g), rel=1e-10, abs=1e-10)


def test_objective_shape_mismatch(triangle):
    with pytest.raises(ShapeError):
        objective_f(AssignmentMatrix.uniform(2, 4), triangle)
    with pytest.raises(ShapeError):
        gradient_f(AssignmentMatrix.uniform(2, 4), triangle)


def test_gradient_examples(triangle):
    assert np.allclose(gradient_f(AssignmentMatrix.uniform(2, 3), triangle), 2.0)
    empty = parse_gset("4 0")
    assert not gradient_f(AssignmentMatrix.uniform(3, 4), empty).any()


def central_difference(x, g, h=1e-5):
    vals = x.values
    out = np.zeros_like(vals)
    for idx in np.ndindex(vals.shape):
        plus, minus = vals.copy(), vals.copy()
        plus[idx] += h
        minus[idx] -= h
        out[idx] = (dense_objective(plus, g) - dense_objective(minus, g)) / (2 * h)
    return out


@pytest.mark.parametrize("seed", range(20))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(2, 31)), p=0.3)
    x = random_simplex(rng, int(rng.integers(2, 5)), g.node_count)
    fd = central_difference(x, g)
    an = gradient_f(x, g)
    assert np.linalg.norm(an - fd) <= 1e-6 * max(np.linalg.norm(fd), 1e-12)


def test_cut_from_objective(triangle):
    assert cut_from_objective(triangle, 2.0) == 2.0
    assert cut_from_objective(triangle, 2 * triangle.total_edge_weight) == 0
    assert cut_from_objective(parse_gset("2 0"), 0.0) == 0


@given(st.integers(0, 10_000))
@settings(max_examples=40, deadline=None)
def test_one_hot_identity(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, int(rng.integers(2, 12)))
    k = int(rng.integers(2, 5))
    a = IntegerAssignment(rng.integers(0, k, g.node_count), k)
    x = AssignmentMatrix.from_labels(a)
    total = g.total_edge_weight
    assert objective_f(x, g) / 2 + cut_value(g, a) == pytest.approx(total, rel=1e-9, abs=1e-9)


def test_constructor_renormalises_or_rejects():
    vals = np.array([[0.5 + 4e-7, 1.0], [0.5, 0.0]])
    x = AssignmentMatrix.from_columns(vals)
    assert np.allclose(x.values.sum(axis=0), 1.0, atol=1e-12)
    with pytest.raises(InfeasibleError):
        AssignmentMatrix.from_columns(vals, strict=True)
    with pytest.raises(InfeasibleError):
        AssignmentMatrix.from_columns(np.array([[0.6], [0.5]]))
    with pytest.raises(InfeasibleError):
        AssignmentMatrix.from_columns(np.array([[1.5], [-0.5]]))
    with pytest.raises(InfeasibleError):
        AssignmentMatrix.from_columns(np.array([[np.nan], [1.0]]))


def test_text_round_trip():
    x = x_star()
    assert np.array_equal(AssignmentMatrix.from_text(x.to_text()).values, x.values)
    assert x.to_text().splitlines()[0] == "2 3"


def test_support_pattern():
    assert support_pattern(AssignmentMatrix(np.array([[0.0], [1.0]]))).sets == ((1,),)
    assert support_pattern(x_star()).sets == ((0, 1), (0,), (1,))
    assert support_pattern(AssignmentMatrix.uniform(4, 1), tol=0).sets == ((0, 1, 2, 3),)
    with pytest.raises(DegenerateSupportError):
        support_pattern(AssignmentMatrix.uniform(4, 1), tol=0.5)


def test_neighborhood_contains():
    x1 = AssignmentMatrix(np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0]]))
    assert neighborhood_contains(x_star(), x_star())
    assert neighborhood_contains(x_star(), x1)
    one_hot = AssignmentMatrix(np.array([[1.0], [0.0]]))
    assert not neighborhood_contains(one_hot, AssignmentMatrix.uniform(2, 1))
    with pytest.raises(ShapeError):
        neighborhood_contains(one_hot, AssignmentMatrix.uniform(2, 2))


def test_enumerate_neighborhood():
    labs = sorted(tuple(a.labels.tolist()) for a in enumerate_integer_neighborhood(x_star()))
    assert labs == [(0, 0, 1), (1, 0, 1)]
    integral = AssignmentMatrix(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert [a.labels.tolist() for a in enumerate_integer_neighborhood(integral)] == [[0, 1]]
    assert len(enumerate_integer_neighborhood(AssignmentMatrix.uniform(2, 2))) == 4


def test_enumerate_neighborhood_cap():
    with pytest.raises(EnumerationTooLargeError) as info:
        enumerate_integer_neighborhood(AssignmentMatrix.uniform(3, 40), cap=1000)
    assert info.value.size > 1000


@given(st.integers(0, 10_000))
@settings(max_examples=30, deadline=None)
def test_enumeration_size_is_support_product(seed):
    rng = np.random.default_rng(seed)
    k, n = int(rng.integers(2, 4)), int(rng.integers(1, 6))
    vals = rng.random((k, n)) * (rng.random((k, n)) < 0.6)
    vals[rng.integers(0, k, n), np.arange(n)] += 0.5
    x = AssignmentMatrix(vals / vals.sum(axis=0))
    sizes = support_pattern(x).sizes()
    labs = enumerate_integer_neighborhood(x)
    assert len(labs) == int(np.prod(sizes))
    assert len({tuple(a.labels.tolist()) for a in labs}) == len(labs)


def test_verify_basin_on_optimum(triangle):
    ok, dev = verify_basin(x_star(), triangle, samples=100, seed=0)
    assert ok and dev <= 1e-9


def test_verify_basin_integral_anchor(triangle):
    anchor = AssignmentMatrix(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]]))
    assert verify_basin(anchor, triangle, samples=10)[0]


def test_verify_basin_fails_off_optimum(triangle):
    # the uniform point's neighborhood contains both monochromatic labelings (f=6) and optimal ones (f=2)
    fs = {objective_f(AssignmentMatrix.from_labels(IntegerAssignment(lab, 2)), triangle)
          for lab in itertools.product(range(2), repeat=3)}
    assert fs == {2.0, 6.0}
    ok, dev = verify_basin(AssignmentMatrix.uniform(2, 3), triangle, samples=50, seed=1)
    assert not ok and dev > 1e-3
