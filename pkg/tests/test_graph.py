import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphreg.errors import DataIOError, ValidationError
from graphreg.graph import (
    Graph,
    append_node,
    geodesic_adjacency,
    haversine_km,
    knn_attachment,
    laplacian,
    load_adjacency,
    load_coords,
    smoothness,
    subgraph,
    write_adjacency,
)
from tests.conftest import random_adjacency, random_attachment, random_graph


# ---------------------------------------------------------------------------
# laplacian
# ---------------------------------------------------------------------------

def test_laplacian_of_two_node_path():
    L = laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(L, [[1, -1], [-1, 1]])


def test_laplacian_of_empty_graph_is_zero():
    np.testing.assert_array_equal(laplacian(np.zeros((3, 3))), np.zeros((3, 3)))


def test_laplacian_of_uniform_triangle():
    A = np.ones((3, 3)) - np.eye(3)
    L = laplacian(A)
    np.testing.assert_array_equal(np.diag(L), [2, 2, 2])
    assert np.all(L[~np.eye(3, dtype=bool)] == -1)


def test_laplacian_rejects_asymmetric_adjacency():
    A = np.array([[0.0, 1.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ValidationError, match=r"\(0, 1\)"):
        laplacian(A)


def test_laplacian_rejects_negative_weight():
    A = np.array([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(ValidationError, match="negative"):
        laplacian(A)


def test_laplacian_rejects_self_loop():
    with pytest.raises(ValidationError, match="self-loop"):
        laplacian(np.array([[1.0, 0.0], [0.0, 0.0]]))


@settings(max_examples=50, deadline=None)
@given(M=st.integers(1, 12), seed=st.integers(0, 2**32 - 1))
def test_laplacian_is_symmetric_psd_with_zero_row_sums(M, seed):
    g = random_graph(np.random.default_rng(seed), M)
    np.testing.assert_array_equal(g.L, g.L.T)
    np.testing.assert_allclose(g.L.sum(axis=1), 0.0, atol=1e-12)
    assert np.linalg.eigvalsh(g.L).min() >= -1e-10


def test_graph_is_immutable(rng):
    g = random_graph(rng, 4)
    with pytest.raises(ValueError):
        g.A[0, 1] = 5.0


# ---------------------------------------------------------------------------
# smoothness
# ---------------------------------------------------------------------------

def test_constant_signal_is_perfectly_smooth(rng):
    A = random_adjacency(rng, 6, density=1.0)
    assert smoothness(np.full(6, 3.7), laplacian(A)) == pytest.approx(0.0, abs=1e-12)


def test_smoothness_of_two_node_path():
    L = laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert smoothness(np.array([0.0, 1.0]), L) == 1.0


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_smoothness_equals_edge_sum(seed):
    rng = np.random.default_rng(seed)
    A = random_adjacency(rng, 5)
    y = rng.standard_normal(5)
    edge_sum = sum(
        A[i, j] * (y[i] - y[j]) ** 2 for i in range(5) for j in range(i + 1, 5)
    )
    assert smoothness(y, laplacian(A)) == pytest.approx(edge_sum, rel=1e-12, abs=1e-14)


def test_smoothness_rejects_wrong_length(rng):
    with pytest.raises(ValidationError):
        smoothness(np.ones(3), random_graph(rng, 4).L)


# ---------------------------------------------------------------------------
# append_node
# ---------------------------------------------------------------------------

def test_append_to_single_node():
    g = append_node(Graph.empty(1), np.array([1.0]))
    np.testing.assert_array_equal(g.L, [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(g.A, [[0, 1], [1, 0]])


def test_append_disconnected_node_borders_with_zeros(rng):
    g = random_graph(rng, 4)
    grown = append_node(g, np.zeros(4))
    expected = np.zeros((5, 5))
    expected[:4, :4] = g.L
    np.testing.assert_array_equal(grown.L, expected)


@settings(max_examples=100, deadline=None)
@given(M=st.integers(1, 10), seed=st.integers(0, 2**32 - 1))
def test_append_node_matches_laplacian_of_new_adjacency(M, seed):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, M)
    a = random_attachment(rng, M)
    grown = append_node(g, a)

    np.testing.assert_allclose(grown.L, laplacian(grown.A), rtol=0, atol=1e-12)
    np.testing.assert_array_equal(grown.A[:M, :M], g.A)
    np.testing.assert_array_equal(grown.A[M, :M], a)
    assert grown.A[M, M] == 0.0


def test_append_node_rejects_negative_weights(rng):
    with pytest.raises(ValidationError, match="negative"):
        append_node(random_graph(rng, 3), np.array([0.1, -0.2, 0.0]))


def test_append_node_rejects_wrong_length(rng):
    with pytest.raises(ValidationError):
        append_node(random_graph(rng, 3), np.ones(4))


def test_subgraph_keeps_requested_order(rng):
    g = random_graph(rng, 5, density=1.0)
    sub = subgraph(g, [3, 0])
    assert sub.A[0, 1] == g.A[3, 0]
    assert sub.M == 2


def test_knn_attachment_keeps_strongest_links():
    a = np.array([0.2, 0.9, 0.5, 0.9, 0.1])
    np.testing.assert_array_equal(knn_attachment(a, 2), [0, 0.9, 0, 0.9, 0])
    np.testing.assert_array_equal(knn_attachment(a, 10), a)
    np.testing.assert_array_equal(knn_attachment(a, 0), np.zeros(5))


# ---------------------------------------------------------------------------
# geodesic adjacency
# ---------------------------------------------------------------------------

def test_haversine_one_degree_of_latitude():
    d = haversine_km(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert d[0, 1] == pytest.approx(6371.0 * math.pi / 180.0, rel=1e-12)
    assert d[0, 0] == 0.0


def test_two_points_give_exp_minus_half():
    A = geodesic_adjacency([(59.33, 18.07), (57.71, 11.97)])
    assert A[0, 1] == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert A[0, 0] == A[1, 1] == 0.0


def test_coincident_pair_has_unit_weight():
    A = geodesic_adjacency([(59.0, 18.0), (59.0, 18.0), (55.6, 13.0)])
    assert A[0, 1] == pytest.approx(1.0)
    assert 0 < A[0, 2] < 1


def test_geodesic_adjacency_for_25_cities(rng):
    coords = np.column_stack([rng.uniform(55, 69, 25), rng.uniform(11, 24, 25)])
    A = geodesic_adjacency(coords)
    assert A.shape == (25, 25)
    np.testing.assert_array_equal(A, A.T)
    np.testing.assert_array_equal(np.diag(A), 0.0)
    off = A[~np.eye(25, dtype=bool)]
    assert np.all((off > 0) & (off <= 1))


def test_geodesic_adjacency_needs_two_points():
    with pytest.raises(ValidationError):
        geodesic_adjacency([(59.0, 18.0)])


def test_geodesic_adjacency_rejects_all_coincident():
    with pytest.raises(ValidationError, match="coincide"):
        geodesic_adjacency([(59.0, 18.0)] * 3)


@pytest.mark.parametrize("bad", [(np.nan, 1.0), (0.0, np.inf), (91.0, 0.0), (0.0, -180.5)])
def test_geodesic_adjacency_rejects_invalid_coordinates(bad):
    with pytest.raises(ValidationError, match="row 1"):
        geodesic_adjacency([(0.0, 0.0), bad, (1.0, 1.0)])


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def test_coords_and_adjacency_files(tmp_path):
    coords_csv = tmp_path / "cities.csv"
    coords_csv.write_text(
        "name,lat,lon\nStockholm,59.33,18.07\nGothenburg,57.71,11.97\nMalmo,55.60,13.00\n"
    )
    names, coords = load_coords(str(coords_csv))
    assert names == ["Stockholm", "Gothenburg", "Malmo"]
    assert coords.shape == (3, 2)

    A = geodesic_adjacency(coords)
    out = tmp_path / "adjacency.csv"
    write_adjacency(str(out), A, names)
    g = load_adjacency(str(out))
    np.testing.assert_array_equal(g.A, A)


def test_coords_file_needs_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("city,x,y\na,1,2\n")
    with pytest.raises(DataIOError, match="header"):
        load_coords(str(path))


def test_coords_file_reports_bad_row(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("name,lat,lon\na,1,2\nb,north,3\n")
    with pytest.raises(DataIOError, match="row 3"):
        load_coords(str(path))


def test_missing_adjacency_file(tmp_path):
    with pytest.raises(DataIOError, match="not found"):
        load_adjacency(str(tmp_path / "nope.csv"))


def test_coords_file_rejects_nan_latitude(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("name,lat,lon\na,1,2\nb,nan,3\nc,2,2\n")
    with pytest.raises(ValidationError, match="row 3"):
        load_coords(str(path))
