import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aggne import ConnectivityError, DomainError
from aggne.graph import (aggregate, build_graph, laplacian, laplacian_apply, perp_projector_matrix,
                         project_parallel, project_perp)


def test_star_edges():
    g = build_graph("star", 3)
    assert g.edges == ((0, 1), (0, 2))


def test_ring_degrees():
    g = build_graph("ring", 20)
    assert len(g.edges) == 20
    assert np.all(g.degrees() == 2)


def test_disconnected_edge_list():
    with pytest.raises(ConnectivityError):
        build_graph("edge_list", 3, edges=[(0, 1)])


@pytest.mark.parametrize("topology, kwargs", [
    ("star", {}), ("ring", {}), ("path", {}), ("complete", {}),
])
def test_too_few_nodes(topology, kwargs):
    with pytest.raises(DomainError):
        build_graph(topology, 1, **kwargs)


@pytest.mark.parametrize("edges, weights", [
    ([(0, 0), (0, 1)], None),
    ([(0, 1), (1, 0)], None),
    ([(0, 5)], None),
    ([(0, 1)], [-1.0]),
    ([(0, 1)], [1.0, 2.0]),
])
def test_invalid_edge_lists(edges, weights):
    with pytest.raises(DomainError):
        build_graph("edge_list", 2, edges=edges, weights=weights)


def test_unknown_topology():
    with pytest.raises(DomainError):
        build_graph("torus", 4)


def test_star_spectrum():
    lap = laplacian(build_graph("star", 20))
    assert abs(lap.lambda2 - 1.0) <= 1e-9
    assert abs(lap.lambda_max - 20.0) <= 1e-9


def test_ring_spectrum_matches_circulant_formula():
    N = 20
    lap = laplacian(build_graph("ring", N))
    ev = np.sort(2 - 2 * np.cos(2 * np.pi * np.arange(N) / N))
    assert abs(lap.lambda2 - ev[1]) <= 1e-10 * ev[1]
    assert abs(lap.lambda2 - (2 - 2 * np.cos(np.pi / 10))) <= 1e-12
    assert abs(lap.lambda_max - 4.0) <= 1e-10


def test_path2_closed_form():
    lap = laplacian(build_graph("path", 2))
    np.testing.assert_array_equal(lap.matrix, [[1.0, -1.0], [-1.0, 1.0]])
    assert lap.lambda2 == pytest.approx(2.0, abs=1e-12)
    assert lap.lambda_max == pytest.approx(2.0, abs=1e-12)


def test_weighted_laplacian():
    g = build_graph("path", 3, weights=[2.0, 0.5])
    lap = laplacian(g)
    np.testing.assert_allclose(lap.matrix, [[2, -2, 0], [-2, 2.5, -0.5], [0, -0.5, 0.5]])


def test_apply_hand_multiplied_star():
    lap = laplacian(build_graph("star", 3))
    np.testing.assert_allclose(laplacian_apply(lap, np.array([0.0, 1.0, 2.0])), [-3.0, 1.0, 2.0])


def test_apply_kills_consensus():
    lap = laplacian(build_graph("ring", 6))
    w = np.array([1.5, -2.0, 0.25])
    assert np.abs(lap.apply(np.tile(w, (6, 1)))).max() <= 1e-12


def test_apply_dimension_mismatch():
    lap = laplacian(build_graph("ring", 4))
    with pytest.raises(DomainError):
        lap.apply(np.ones(7))
    with pytest.raises(DomainError):
        lap.apply(np.ones((3, 2)))


def test_projectors_two_blocks():
    v = np.array([1.0, 3.0])
    np.testing.assert_allclose(project_parallel(v, 2), [2.0, 2.0])
    np.testing.assert_allclose(project_perp(v, 2), [-1.0, 1.0])
    np.testing.assert_allclose(aggregate(v, 2), [2.0])


def test_projectors_on_consensus_vector():
    v = np.tile([1.0, -4.0], 5).ravel()
    np.testing.assert_allclose(project_parallel(v, 5), v)
    assert np.abs(project_perp(v, 5)).max() <= 1e-15


def test_neighbors():
    g = build_graph("star", 4)
    assert g.neighbors(0) == [1, 2, 3]
    assert g.neighbors(2) == [0]


@st.composite
def connected_graphs(draw):
    N = draw(st.integers(2, 9))
    order = draw(st.permutations(range(N)))
    edges = set()
    for k in range(1, N):
        parent = order[draw(st.integers(0, k - 1))]
        edges.add(tuple(sorted((order[k], parent))))
    extra = draw(st.lists(st.tuples(st.integers(0, N - 1), st.integers(0, N - 1)), max_size=10))
    for i, j in extra:
        if i != j:
            edges.add(tuple(sorted((i, j))))
    edges = sorted(edges)
    weights = draw(st.lists(st.floats(0.1, 5.0), min_size=len(edges), max_size=len(edges)))
    return build_graph("edge_list", N, edges=edges, weights=weights)


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_laplacian_invariants(g):
    lap = laplacian(g)
    L = lap.matrix
    d_max = g.max_degree
    assert np.array_equal(L, L.T)
    assert np.abs(L @ np.ones(g.n_nodes)).max() <= 1e-12 * (1 + d_max)
    assert lap.lambda2 > 0
    assert d_max - 1e-9 <= lap.lambda_max <= 2 * d_max + 1e-9


@settings(max_examples=60, deadline=None)
@given(connected_graphs(), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_apply_matches_kron(g, d, seed):
    lap = laplacian(g, block_dim=d)
    v = np.random.default_rng(seed).standard_normal(g.n_nodes * d)
    np.testing.assert_allclose(lap.apply(v), lap.kron(d) @ v, atol=1e-12)
    out = lap.apply(project_perp(v, g.n_nodes))
    assert np.abs(aggregate(out, g.n_nodes)).max() <= 1e-12 * (1 + np.abs(v).max())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.integers(1, 3), st.integers(0, 2 ** 32 - 1))
def test_projector_identities(N, d, seed):
    v = np.random.default_rng(seed).standard_normal(N * d)
    par, perp = project_parallel(v, N), project_perp(v, N)
    np.testing.assert_allclose(par + perp, v, atol=1e-14)
    np.testing.assert_allclose(project_parallel(par, N), par, atol=1e-14)
    np.testing.assert_allclose(project_perp(perp, N), perp, atol=1e-14)
    assert abs(par @ perp) <= 1e-12 * (1 + v @ v)
    np.testing.assert_allclose(perp_projector_matrix(N, d) @ v, perp, atol=1e-13)
