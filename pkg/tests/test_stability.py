import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from graphstab.exceptions import ValidationError
from graphstab.filters import FilterBank, filter_matrix
from graphstab.gnn import GnnModel, hidden_output, init_model
from graphstab.graph import permute_gso, permute_signal, random_permutation
from graphstab.linalg import operator_norm
from graphstab.perturbation import dilate, random_diagonal_error, relative_perturb
from graphstab.spectral import eval_response
from graphstab.stability import (
    CSV_COLUMNS,
    bound_absolute,
    bound_gnn,
    bound_relative,
    bound_structural,
    delta_for_model,
    filter_distance,
    first_order_residual,
    gnn_distance,
    sweep,
)

from conftest import random_graph, random_symmetric


def test_filter_distance_examples():
    S = random_graph(10, 0)
    h = [0.2, 1.0, -0.5, 0.3]
    assert filter_distance(h, S, S) == 0.0
    assert filter_distance([1.0], S, random_graph(10, 1)) == 0.0
    with pytest.raises(ValidationError):
        filter_distance(h, S, random_graph(9, 1))
    with pytest.raises(ValidationError):
        filter_distance(h, S, S, matching="hungarian")


@pytest.mark.parametrize("eps", [1e-3, 1e-2, 1e-1, 0.5])
def test_filter_distance_dilation_closed_form(eps):
    S = random_graph(15, 2)
    h = [0.1, -0.7, 0.4, 0.9, -0.2]
    lam = S.eigenvalues
    expected = np.max(np.abs(eval_response(h, lam) - eval_response(h, (1 + eps) * lam)))
    assert filter_distance(h, S, dilate(S, eps)) == pytest.approx(expected, abs=1e-9)


def test_eigen_greedy_is_no_worse_than_identity():
    S = random_graph(12, 3, p=0.5)
    P = random_permutation(12, 4)
    S_hat = permute_gso(S, P)
    h = [0.0, 1.0, 0.5]
    ident = filter_distance(h, S, S_hat)
    greedy = filter_distance(h, S, S_hat, matching="eigen-greedy")
    assert greedy <= ident
    assert greedy <= 1e-9


def test_gnn_distance_examples():
    S = random_graph(8, 5)
    model = init_model(4, 3, seed=1)
    X = np.random.default_rng(0).standard_normal((5, 8))
    assert gnn_distance(model, S, S, X) == 0.0
    with pytest.raises(ValidationError):
        gnn_distance(model, S, S, np.zeros((0, 8)))
    with pytest.raises(ValidationError):
        gnn_distance(model, S, S, np.zeros((1, 8)))


def test_gnn_distance_under_relabeling_is_zero():
    S = random_graph(9, 6)
    model = init_model(3, 4, seed=2)
    P = random_permutation(9, 3)
    S_hat = permute_gso(S, P)
    for x in np.random.default_rng(1).standard_normal((5, 9)):
        out = permute_signal(hidden_output(model, S, x), P)
        out_hat = hidden_output(model, S_hat, permute_signal(x, P))
        assert np.linalg.norm(out - out_hat) / np.linalg.norm(x) <= 1e-9


def test_gnn_distance_reduces_to_filter_on_signals():
    S = random_graph(10, 7)
    S_hat = relative_perturb(S, random_diagonal_error(10, 0.1, 0))
    h = np.array([0.3, -0.8, 0.5])
    model = GnnModel((FilterBank(h[None, None]),), "identity", np.ones(1))
    X = np.random.default_rng(2).standard_normal((6, 10))
    D = filter_matrix(h, S) - filter_matrix(h, S_hat)
    expected = max(np.linalg.norm(D @ x) / np.linalg.norm(x) for x in X)
    assert gnn_distance(model, S, S_hat, X) == pytest.approx(expected, rel=1e-12)
    assert gnn_distance(model, S, S_hat, X) <= filter_distance(h, S, S_hat) * (1 + 1e-9)


def test_bound_arithmetic():
    assert bound_absolute(1.0, 2.0, 9, 0.0) == 0.0
    assert bound_absolute(1.0, 0.0, 123, 0.1) == pytest.approx(0.1)
    assert bound_absolute(2.0, 3.0, 4, 0.05) == pytest.approx(0.7)
    assert bound_relative(1.0, 1.0, 9, 0.0) == 0.0
    assert bound_relative(1.3, 0.0, 50, 0.2) == pytest.approx(2 * 1.3 * 0.2)
    assert bound_relative(1.0, 1.0, 9, 0.1) == pytest.approx(0.8)
    assert bound_structural(3.0, 0.0) == 0.0
    assert bound_structural(0.0, 0.5) == 0.0
    assert bound_structural(3.0, 0.01) == pytest.approx(0.06)
    assert bound_gnn(2.5, 1, 1, 0.1) == pytest.approx(0.25)
    assert bound_gnn(2.5, 3, 7, 0.0) == 0.0
    assert bound_gnn(2.0, 2, 64, 0.01) == pytest.approx(2.56)
    assert bound_gnn(1.0, 1, 64, 0.1, f_out=64) == pytest.approx(0.8)


def test_delta_catalog():
    assert delta_for_model("absolute", 1.0, 0.0, 10) == 1.0
    assert delta_for_model("relative-structural", 1.0, 5.0, 10) == 2.0
    assert delta_for_model("structural", 1.0, 5.0, 10) == 2.0
    assert delta_for_model("relative", 1.0, 0.0, 100) == 2.0
    assert delta_for_model("relative", 1.0, 1.0, 100) == pytest.approx(22.0)
    with pytest.raises(ValidationError):
        delta_for_model("sideways", 1.0, 0.0, 1)


@settings(max_examples=30, deadline=None)
@given(C=st.floats(0, 10), d=st.floats(0, 8), N=st.integers(1, 500), e1=st.floats(0, 1), e2=st.floats(0, 1))
def test_bounds_nonnegative_and_monotone(C, d, N, e1, e2):
    lo, hi = sorted((e1, e2))
    for f in (lambda e: bound_absolute(C, d, N, e), lambda e: bound_relative(C, d, N, e), lambda e: bound_structural(C, e)):
        assert 0 <= f(lo) <= f(hi)


def test_first_order_residual_examples():
    S = random_graph(8, 9)
    assert first_order_residual([0.5, 1.0, -0.3], S, np.zeros((8, 8))) == 0.0
    E = 0.1 * random_symmetric(8, 1)
    assert first_order_residual([0.5, -1.2], S, E, "absolute") <= 1e-12
    with pytest.raises(ValidationError):
        first_order_residual([1.0, 1.0], S, np.zeros((7, 7)))


@pytest.mark.parametrize("model", ["absolute", "relative"])
def test_first_order_residual_halving(model):
    S = random_graph(12, 10)
    h = [0.2, -0.6, 0.5, 0.3, -0.1]
    E = random_symmetric(12, 4)
    E = E / operator_norm(E)
    eps = 1e-3
    ratio = first_order_residual(h, S, 2 * eps * E, model) / first_order_residual(h, S, eps * E, model)
    assert 3.5 <= ratio <= 4.5


def _models(n_feat=4, K=3):
    return {"a": init_model(n_feat, K, seed=0), "b": init_model(n_feat, K, nonlinearity="identity", seed=1)}


def test_sweep_zero_eps():
    S = random_graph(10, 11)
    for model in ("absolute", "relative", "structural", "dilation"):
        for row in sweep(S, model, [0.0], _models(), seed=0):
            assert row.measured_distance == 0.0 and row.measured_filter_distance == 0.0
            assert row.bound == 0.0 and row.looseness_ratio == 0.0


def test_sweep_structural_small_eps_within_bound():
    S = random_graph(20, 12)
    rows = sweep(S, "structural", [1e-3, 3e-3, 1e-2], _models(), seed=3)
    assert rows
    for row in rows:
        assert row.measured_filter_distance <= row.bound_filter
        assert row.measured_distance <= row.bound


def test_sweep_rows_monotone_deterministic_and_schema():
    S = random_graph(12, 13)
    grid = [1e-3, 1e-2, 0.1, 1.0]
    rows = sweep(S, "dilation", grid, _models(), seed=5)
    again = sweep(S, "dilation", grid, _models(), seed=5)
    assert [r.as_dict() for r in rows] == [r.as_dict() for r in again]
    for arch in ("a", "b"):
        bounds = [r.bound for r in rows if r.arch == arch]
        assert bounds == sorted(bounds)
    assert tuple(rows[0].csv_row()) == CSV_COLUMNS
    assert all(r.bound >= 0 and r.bound_filter >= 0 for r in rows)


def test_sweep_validation():
    S = random_graph(6, 0)
    with pytest.raises(ValidationError):
        sweep(S, "relative", [], _models())
    with pytest.raises(ValidationError):
        sweep(S, "relative", [0.1, 0.01], _models())
    with pytest.raises(ValidationError):
        sweep(S, "warp", [0.1], _models())
    with pytest.raises(ValidationError):
        sweep(S, "relative", [0.1], {})
