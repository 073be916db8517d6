import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

import consclust.distance as distance_mod
from consclust import (
    AttributeWeights,
    DataMatrix,
    InputError,
    PerAttributeDistance,
    fit_cosa_weights,
    fit_sparse_weights,
    pairwise_distance,
)
from consclust.distance import (
    _nearest_neighbours,
    _project_sparse,
    neighbourhood_size,
    standardize_columns,
)
from oracles import sparse_grid_oracle, sparse_objective


def random_data(n, p, seed):
    return np.random.default_rng(seed).normal(size=(n, p))


def per_attribute_stack(values, metric):
    """(n, n, p) tensor of d_ijm built entry by entry."""
    X = np.asarray(values, dtype=np.float64)
    n, p = X.shape
    out = np.empty((n, n, p))
    for i in range(n):
        for j in range(n):
            diff = X[i] - X[j]
            out[i, j] = diff * diff if metric == "squared" else np.abs(diff)
    return out


# ----------------------------------------------------------------- DataMatrix


def test_data_matrix_defaults_and_validation():
    dm = DataMatrix.from_values([[1.0, 2.0], [3.0, 4.0]])
    assert dm.item_ids == ("item1", "item2")
    assert dm.attribute_ids == ("attr1", "attr2")
    assert dm.n_items == 2 and dm.n_attributes == 2

    with pytest.raises(InputError, match="unique"):
        DataMatrix(np.ones((2, 1)), ("a", "a"), ("x",))
    with pytest.raises(InputError):
        DataMatrix.from_values([[1.0, np.nan]])
    with pytest.raises(InputError):
        DataMatrix.from_values(np.ones((1, 3)))  # a single item cannot pair


def test_data_matrix_reports_bad_cell():
    values = np.ones((3, 2))
    values[1, 0] = np.inf
    with pytest.raises(InputError, match=r"row 1.*column 0"):
        DataMatrix.from_values(values)


# ------------------------------------------------------------------ distances


@pytest.mark.parametrize("metric", ["squared", "absolute"])
def test_pairwise_matches_definition(metric):
    X = random_data(9, 4, seed=1)
    stack = per_attribute_stack(X, metric)
    np.testing.assert_allclose(
        pairwise_distance(X, metric), stack.sum(axis=2), rtol=0, atol=1e-12
    )


@pytest.mark.parametrize("metric", ["squared", "absolute"])
def test_weighted_matches_definition(metric):
    X = random_data(8, 5, seed=2)
    w = np.random.default_rng(3).uniform(0.0, 2.0, size=5)
    stack = per_attribute_stack(X, metric)
    pad = PerAttributeDistance(X, metric)
    np.testing.assert_allclose(
        pad.weighted(w), stack @ w, rtol=1e-12, atol=1e-12
    )
    # Unit weights recover the unweighted matrix.
    np.testing.assert_allclose(
        pad.weighted(np.ones(5)), pad.total(), rtol=1e-12, atol=1e-12
    )


def test_weighted_rejects_bad_weights():
    pad = PerAttributeDistance(random_data(4, 3, seed=0))
    with pytest.raises(InputError):
        pad.weighted(np.array([1.0, -0.1, 0.5]))
    with pytest.raises(InputError):
        pad.weighted(np.ones(4))


@pytest.mark.parametrize("metric", ["squared", "absolute"])
def test_attribute_scores_match_definition(metric):
    X = random_data(7, 6, seed=4)
    U = np.abs(np.random.default_rng(5).normal(size=(7, 7)))
    stack = per_attribute_stack(X, metric)
    expected = np.einsum("ijm,ij->m", stack, U)
    pad = PerAttributeDistance(X, metric)
    np.testing.assert_allclose(pad.attribute_scores(U), expected, rtol=1e-10)


@pytest.mark.parametrize("metric", ["squared", "absolute"])
def test_row_and_max_weighted_match_definition(metric):
    X = random_data(6, 4, seed=6)
    W = np.random.default_rng(7).dirichlet(np.ones(4), size=6)
    stack = per_attribute_stack(X, metric)
    pad = PerAttributeDistance(X, metric)

    expected_row = np.einsum("ijm,im->ij", stack, W)
    np.fill_diagonal(expected_row, 0.0)
    np.testing.assert_allclose(pad.row_weighted(W), expected_row, atol=1e-12)

    pairmax = np.maximum(W[:, None, :], W[None, :, :])
    expected_max = np.einsum("ijm,ijm->ij", stack, pairmax)
    np.fill_diagonal(expected_max, 0.0)
    np.testing.assert_allclose(pad.max_weighted(W), expected_max, atol=1e-12)


def test_neighbour_attribute_means_match_definition():
    X = random_data(10, 3, seed=8)
    pad = PerAttributeDistance(X, "squared")
    idx = np.argsort(np.random.default_rng(9).random((10, 10)), axis=1)[:, :3]
    got = pad.neighbour_attribute_means(idx)
    stack = per_attribute_stack(X, "squared")
    expected = np.array([stack[i, idx[i]].mean(axis=0) for i in range(10)])
    np.testing.assert_allclose(got, expected, atol=1e-12)


def test_chunked_paths_agree_with_unchunked(monkeypatch):
    X = random_data(12, 9, seed=10)
    W = np.random.default_rng(11).dirichlet(np.ones(9), size=12)
    U = np.abs(np.random.default_rng(12).normal(size=(12, 12)))
    idx = _nearest_neighbours(pairwise_distance(X), 3)
    pad = PerAttributeDistance(X, "absolute")
    whole = (
        pad.attribute_scores(U),
        pad.row_weighted(W),
        pad.max_weighted(W),
        pad.neighbour_attribute_means(idx),
    )
    # Force many tiny chunks and recompute.
    monkeypatch.setattr(distance_mod, "_CHUNK_CELLS", 16)
    pad_small = PerAttributeDistance(X, "absolute")
    pieces = (
        pad_small.attribute_scores(U),
        pad_small.row_weighted(W),
        pad_small.max_weighted(W),
        pad_small.neighbour_attribute_means(idx),
    )
    for a, b in zip(whole, pieces):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(
    arrays(
        np.float64,
        array_shapes(min_dims=2, max_dims=2, min_side=2, max_side=6),
        elements=st.floats(-50, 50, allow_nan=False),
    ),
    st.sampled_from(["squared", "absolute"]),
)
def test_distance_matrix_properties(X, metric):
    dist = pairwise_distance(X, metric)
    assert np.all(dist >= 0)
    np.testing.assert_array_equal(dist, dist.T)
    assert np.all(np.diag(dist) == 0)


# -------------------------------------------------------------- sparse weights


def test_project_sparse_inactive_bound_is_plain_normalization():
    scores = np.array([3.0, 4.0, 0.0, 1.0])
    w = _project_sparse(scores, bound=2.0)  # sqrt(4) = 2: L1 inactive
    np.testing.assert_allclose(w, scores / np.linalg.norm(scores), atol=1e-12)


def test_project_sparse_tight_bound_concentrates():
    scores = np.array([10.0, 1.0, 0.5])
    w = _project_sparse(scores, bound=1.0 + 1e-9)
    assert w.sum() <= 1.0 + 1e-6
    assert np.linalg.norm(w) <= 1.0 + 1e-9
    assert np.argmax(w) == 0
    assert w[0] > 0.999


def test_project_sparse_equal_scores():
    w = _project_sparse(np.ones(4), bound=2.0)
    np.testing.assert_allclose(w, np.full(4, 0.5), atol=1e-12)


def test_project_sparse_feasible_over_many_inputs():
    rng = np.random.default_rng(13)
    for _ in range(200):
        p = int(rng.integers(2, 9))
        scores = rng.uniform(0.0, 5.0, size=p)
        scores[rng.random(p) < 0.3] = 0.0
        bound = float(rng.uniform(1.0 + 1e-6, np.sqrt(p) + 0.5))
        w = _project_sparse(scores, bound)
        assert np.all(w >= 0)
        assert w.sum() <= bound + 1e-8
        assert np.linalg.norm(w) <= 1.0 + 1e-9


def test_fit_sparse_weights_requires_bound_above_one():
    pad = PerAttributeDistance(random_data(5, 3, seed=14))
    with pytest.raises(InputError, match="exceed 1"):
        fit_sparse_weights(pad, bound=1.0)


def test_fit_sparse_weights_feasible_and_bounded_by_frobenius():
    X = random_data(14, 6, seed=15)
    pad = PerAttributeDistance(X, "squared")
    fit = fit_sparse_weights(pad, bound=1.5)
    w = fit.values
    assert w.shape == (6,)
    assert np.all(w >= 0)
    assert w.sum() <= 1.5 + 1e-8
    assert np.linalg.norm(w) <= 1.0 + 1e-9
    assert fit.kind == "sparse"
    # Each recorded objective is <w_t, a(U_t)> <= ||D_{w_t}||_F by duality.
    stack = per_attribute_stack(X, "squared")
    assert fit.objective <= sparse_objective(stack, w) + 1e-6
    # Alternating maximization cannot go downhill.
    steps = np.asarray(fit.objectives)
    assert np.all(np.diff(steps) >= -1e-7 * steps.max())


def test_fit_sparse_weights_finds_dominant_attribute():
    rng = np.random.default_rng(16)
    X = rng.normal(size=(20, 5))
    X[:, 2] *= 12.0  # attribute 2 carries nearly all the distance mass
    fit = fit_sparse_weights(PerAttributeDistance(X, "squared"), bound=1.05)
    assert np.argmax(fit.values) == 2
    assert fit.values[2] > 0.99


@pytest.mark.parametrize("metric", ["squared", "absolute"])
@pytest.mark.parametrize("seed,bound", [(17, 1.3), (18, 1.6), (19, 1.2)])
def test_fit_sparse_weights_against_grid_search(metric, seed, bound):
    X = random_data(10, 3, seed=seed)
    pad = PerAttributeDistance(X, metric)
    fit = fit_sparse_weights(pad, bound=bound)
    stack = per_attribute_stack(X, metric)
    achieved = sparse_objective(stack, fit.values)
    grid_value, _ = sparse_grid_oracle(stack, bound)
    # The fit must do at least as well as a dense feasible grid, and the
    # grid refinement is fine enough that the two agree tightly.
    assert achieved >= grid_value - 1e-9 * grid_value
    assert abs(achieved - grid_value) <= 1e-4 * grid_value


# ---------------------------------------------------------------- row weights


def test_neighbourhood_size_floor_sqrt():
    assert neighbourhood_size(2) == 1
    assert neighbourhood_size(3) == 1
    assert neighbourhood_size(4) == 2
    assert neighbourhood_size(99) == 9
    assert neighbourhood_size(100) == 10


def test_nearest_neighbours_break_ties_to_lower_index():
    dist = np.array(
        [
            [0.0, 2.0, 1.0, 1.0],
            [2.0, 0.0, 3.0, 3.0],
            [1.0, 3.0, 0.0, 5.0],
            [1.0, 3.0, 5.0, 0.0],
        ]
    )
    idx = _nearest_neighbours(dist, 2)
    np.testing.assert_array_equal(idx[0], [2, 3])  # tie at 1.0: lower first
    np.testing.assert_array_equal(idx[1], [0, 2])  # tie at 3.0: 2 before 3


def test_fit_cosa_weights_rows_on_simplex():
    pad = PerAttributeDistance(random_data(17, 5, seed=20), "squared")
    fit = fit_cosa_weights(pad, scale=0.5)
    W = fit.values
    assert W.shape == (17, 5)
    assert np.all(W > 0)
    np.testing.assert_allclose(W.sum(axis=1), 1.0, rtol=0, atol=1e-12)
    assert fit.kind == "cosa"


def test_fit_cosa_weights_large_scale_is_uniform():
    pad = PerAttributeDistance(random_data(12, 4, seed=21), "squared")
    fit = fit_cosa_weights(pad, scale=1e9)
    np.testing.assert_allclose(fit.values, 0.25, atol=1e-9)
    assert fit.converged


def test_fit_cosa_weights_single_step_matches_softmax_oracle():
    X = random_data(11, 4, seed=22)
    pad = PerAttributeDistance(X, "squared")
    scale = 0.7
    got = fit_cosa_weights(pad, scale=scale, max_iter=1).values

    stack = per_attribute_stack(X, "squared")
    unif = stack.mean(axis=2)  # uniform rows 1/p: distances scale by 1/p
    size = neighbourhood_size(11)
    expected = np.empty_like(got)
    for i in range(11):
        order = sorted((unif[i, j], j) for j in range(11) if j != i)
        neighbours = [j for _, j in order[:size]]
        s = stack[i, neighbours].mean(axis=0)
        e = np.exp(-(s - s.min()) / scale)
        expected[i] = e / e.sum()
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-14)


def test_fit_cosa_weights_row_minimizes_entropy_penalized_cost():
    X = random_data(13, 4, seed=23)
    pad = PerAttributeDistance(X, "squared")
    scale = 0.4
    fit = fit_cosa_weights(pad, scale=scale, max_iter=1)
    dist = pad.row_weighted(np.full((13, 4), 0.25))
    idx = _nearest_neighbours(dist, neighbourhood_size(13))
    spread = pad.neighbour_attribute_means(idx)

    def cost(v, s):
        return float(v @ s + scale * np.sum(v * np.log(v)))

    rng = np.random.default_rng(24)
    for i in range(13):
        best = cost(fit.values[i], spread[i])
        for _ in range(50):
            v = rng.dirichlet(np.ones(4))
            assert best <= cost(v, spread[i]) + 1e-10


def test_fit_cosa_weights_prefers_locally_tight_attribute():
    rng = np.random.default_rng(25)
    X = np.column_stack([np.zeros(15), rng.normal(size=15) * 3.0])
    fit = fit_cosa_weights(PerAttributeDistance(X, "squared"), scale=0.2)
    # Attribute 1 has zero spread, so its softmax share is at least 1/2 in
    # every row and dominates overall.
    assert np.all(fit.values[:, 0] > fit.values[:, 1])
    assert np.all(fit.values[:, 0] >= 0.5)
    assert fit.values[:, 0].mean() > 0.8


def test_fit_cosa_weights_converged_means_fixed_point():
    X = random_data(16, 5, seed=26)
    pad = PerAttributeDistance(X, "squared")
    tol = 1e-4
    fit = fit_cosa_weights(pad, scale=0.8, tol=tol)
    assert fit.converged
    W = fit.values
    dist = pad.row_weighted(W)
    idx = _nearest_neighbours(dist, neighbourhood_size(16))
    spread = pad.neighbour_attribute_means(idx)
    shifted = -(spread - spread.min(axis=1, keepdims=True)) / 0.8
    expo = np.exp(np.clip(shifted, -700.0, 0.0))
    W_next = expo / expo.sum(axis=1, keepdims=True)
    assert np.abs(W_next - W).max() <= tol


def test_fit_cosa_weights_rejects_nonpositive_scale():
    pad = PerAttributeDistance(random_data(5, 2, seed=27))
    with pytest.raises(InputError, match="positive"):
        fit_cosa_weights(pad, scale=0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 5.0))
def test_fit_cosa_weights_rows_always_normalized(seed, scale):
    X = random_data(8, 3, seed=seed)
    fit = fit_cosa_weights(PerAttributeDistance(X, "squared"), scale=scale)
    np.testing.assert_allclose(fit.values.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(fit.values > 0)


# ------------------------------------------------------------- standardization


def test_standardize_columns_unit_sample_variance():
    X = random_data(30, 4, seed=28) * np.array([1.0, 5.0, 0.1, 40.0]) + 3.0
    Z = standardize_columns(X)
    np.testing.assert_allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(Z.var(axis=0, ddof=1), 1.0, rtol=1e-12)


def test_standardize_columns_constant_column_to_zero():
    X = np.column_stack([np.full(6, 7.0), np.arange(6.0)])
    Z = standardize_columns(X)
    np.testing.assert_array_equal(Z[:, 0], 0.0)
    np.testing.assert_allclose(Z[:, 1].var(ddof=1), 1.0, rtol=1e-12)


def test_attribute_weights_container_fields():
    aw = AttributeWeights(
        values=np.ones(3), kind="sparse", n_iter=2, converged=True, objective=1.5
    )
    assert aw.objectives == ()
