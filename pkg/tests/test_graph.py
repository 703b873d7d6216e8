import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphstab.exceptions import ValidationError
from graphstab.graph import (
    GraphShiftOperator,
    Permutation,
    build_knn_graph,
    pearson_correlation,
    permute_gso,
    permute_signal,
    random_permutation,
)
from graphstab.linalg import sym_eig

from conftest import random_graph


def test_gso_is_read_only_and_symmetric():
    S = random_graph(5, 0)
    assert np.array_equal(S.matrix, S.matrix.T)
    with pytest.raises(ValueError):
        S.matrix[0, 1] = 1.0
    with pytest.raises(ValidationError):
        GraphShiftOperator(np.eye(3), kind="laplacian-ish")


def test_eig_computed_once_under_threads():
    S = random_graph(20, 1)
    results = []
    threads = [threading.Thread(target=lambda: results.append(S.eig)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert all(r is results[0] for r in results)


def test_permute_identity_and_two_node_swap():
    S = random_graph(6, 2)
    np.testing.assert_array_equal(permute_gso(S, Permutation.identity(6)).matrix, S.matrix)
    two = GraphShiftOperator(np.array([[0.0, 3.0], [3.0, 0.0]]))
    np.testing.assert_array_equal(permute_gso(two, Permutation([1, 0])).matrix, two.matrix)


def test_permute_preserves_spectrum():
    S = random_graph(6, 4, p=0.7)
    P = random_permutation(6, 11)
    np.testing.assert_allclose(sym_eig(permute_gso(S, P).matrix).values, S.eigenvalues, atol=1e-9)


def test_permutation_matrix_form():
    P = random_permutation(7, 3)
    M = P.matrix()
    np.testing.assert_array_equal(M.sum(axis=0), np.ones(7))
    np.testing.assert_array_equal(M.sum(axis=1), np.ones(7))
    S = random_graph(7, 5)
    x = np.arange(7.0)
    np.testing.assert_array_equal(M.T @ x, permute_signal(x, P))
    np.testing.assert_allclose(M.T @ S.matrix @ M, permute_gso(S, P).matrix, atol=0)


def test_permute_signal_examples():
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(permute_signal(x, Permutation.identity(3)), x)
    np.testing.assert_array_equal(permute_signal(x, Permutation([2, 1, 0])), [3.0, 2.0, 1.0])
    P = random_permutation(3, 8)
    np.testing.assert_array_equal(permute_signal(permute_signal(x, P), P.inverse()), x)
    with pytest.raises(ValidationError):
        permute_signal(np.ones(4), P)


def test_random_permutation_examples():
    assert random_permutation(1, 0).mapping.tolist() == [0]
    np.testing.assert_array_equal(random_permutation(50, 9).mapping, random_permutation(50, 9).mapping)
    m = random_permutation(100, 7).mapping
    assert sorted(m.tolist()) == list(range(100))
    with pytest.raises(ValidationError):
        random_permutation(0, 1)


def test_permutation_validation():
    for bad in ([0, 0, 1], [0, 3], [], [[0, 1]], [0.5, 1]):
        with pytest.raises(ValidationError):
            Permutation(bad)
    with pytest.raises(ValidationError):
        permute_gso(random_graph(4, 0), Permutation.identity(5))


def test_compose_matches_sequential_application():
    P, Q = random_permutation(9, 1), random_permutation(9, 2)
    x = np.random.default_rng(0).standard_normal(9)
    np.testing.assert_array_equal(permute_signal(permute_signal(x, P), Q), permute_signal(x, P.compose(Q)))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 15), seed=st.integers(0, 10_000), pseed=st.integers(0, 10_000))
def test_permute_roundtrip_exact(n, seed, pseed):
    S = random_graph(n, seed, normalize=False)
    P = random_permutation(n, pseed)
    np.testing.assert_array_equal(permute_gso(permute_gso(S, P), P.inverse()).matrix, S.matrix)


def _pearson_pair(R, i, j):
    both = (R[:, i] != 0) & (R[:, j] != 0)
    if both.sum() < 2:
        return 0.0
    a, b = R[both, i], R[both, j]
    a, b = a - a.mean(), b - b.mean()
    den = np.sqrt((a * a).sum() * (b * b).sum())
    return 0.0 if den == 0 else float((a * b).sum() / den)


def test_pearson_hand_dataset_matches_per_pair_formula():
    R = np.array([[5, 3, 0], [4, 0, 1], [1, 2, 4], [3, 5, 2]], dtype=float)
    C = pearson_correlation(R)
    for i in range(3):
        for j in range(3):
            expected = 0.0 if i == j else _pearson_pair(R, i, j)
            assert C[i, j] == pytest.approx(expected, abs=1e-12)


def test_pearson_identical_columns_and_no_overlap():
    R = np.array([[1, 1, 0], [3, 3, 0], [5, 5, 0], [0, 0, 4], [0, 0, 2]], dtype=float)
    C, diag = pearson_correlation(R, return_diagnostics=True)
    assert C[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert C[0, 2] == 0.0 and C[1, 2] == 0.0
    assert diag["pairs_too_few_common"] == 2


def test_pearson_zero_variance_counted():
    R = np.array([[2, 1], [2, 4], [2, 5]], dtype=float)
    C, diag = pearson_correlation(R, return_diagnostics=True)
    assert C[0, 1] == 0.0 and diag["pairs_zero_variance"] == 1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), users=st.integers(2, 12), items=st.integers(2, 8))
def test_pearson_range_symmetry_and_oracle(seed, users, items):
    rng = np.random.default_rng(seed)
    R = rng.integers(1, 6, size=(users, items)) * (rng.random((users, items)) < 0.7)
    C = pearson_correlation(R.astype(float))
    assert np.all(np.abs(C) <= 1.0)
    assert np.array_equal(C, C.T) and np.all(np.diag(C) == 0)
    for i in range(items):
        for j in range(i + 1, items):
            assert C[i, j] == pytest.approx(_pearson_pair(R.astype(float), i, j), abs=1e-9)


def test_knn_keep_everything():
    W = np.random.default_rng(0).random((5, 5))
    W = W + W.T
    np.fill_diagonal(W, 0)
    np.testing.assert_array_equal(build_knn_graph(W, 4).matrix, W)


def test_knn_star():
    n = 6
    W = np.full((n, n), 0.1)
    W[0, :] = W[:, 0] = 0.9
    np.fill_diagonal(W, 0)
    A = build_knn_graph(W, 1).matrix
    for i in range(1, n):
        assert A[i, 0] == 0.9
        assert np.count_nonzero(A[i]) == 1


def test_knn_tie_break_lowest_index():
    W = np.ones((4, 4)) - np.eye(4)
    A = build_knn_graph(W, 1).matrix
    # node 0 picks 1; nodes 1, 2, 3 pick 0
    assert A[0, 1] == 1 and A[2, 0] == 1 and A[3, 0] == 1 and A[2, 3] == 0


def test_knn_negative_clamped_and_k_validation():
    W = -np.ones((3, 3)) + np.eye(3)
    assert not np.any(build_knn_graph(W, 1).matrix)
    with pytest.raises(ValidationError):
        build_knn_graph(np.zeros((3, 3)), 3)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 20), data=st.data())
def test_knn_properties(seed, n, data):
    k = data.draw(st.integers(0, n - 1))
    rng = np.random.default_rng(seed)
    W = rng.random((n, n)) + 0.01
    W = W + W.T
    np.fill_diagonal(W, 0)
    A = build_knn_graph(W, k).matrix
    assert np.array_equal(A, A.T)
    assert np.all((np.count_nonzero(A, axis=1)) >= k)
    # brute-force: every node's top-k neighbors survive
    for i in range(n):
        top = sorted(range(n), key=lambda j: (-W[i, j] if j != i else np.inf, j))[:k]
        assert all(A[i, j] == W[i, j] for j in top)
