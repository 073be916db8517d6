import numpy as np
import pytest
from sklearn.base import clone

from consclust import (
    ConsensusClustering,
    CoverageWarning,
    InputError,
    adjusted_rand_index,
    consensus_run,
    default_penalties,
)


@pytest.fixture(scope="module")
def blobs():
    # Near-equilateral centers: the pair merged by a 2-cluster cut varies
    # from subsample to subsample, so only g = 3 is perfectly stable.
    rng = np.random.default_rng(0)
    centers = np.array([[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [5.0, 8.66, 0.0]])
    sizes = (8, 9, 7)
    X = np.vstack(
        [c + rng.normal(0, 0.4, size=(s, 3)) for c, s in zip(centers, sizes)]
    )
    truth = np.repeat([1, 2, 3], sizes)
    return X, truth


@pytest.fixture(scope="module")
def base_run(blobs):
    X, _ = blobs
    return consensus_run(
        X,
        n_subsamples=24,
        subsample_fraction=0.5,
        master_seed=5,
        cluster_counts=(2, 3, 4, 5),
        compute_silhouette=True,
    )


# ------------------------------------------------------------------ pipeline


def test_run_recovers_planted_clusters(base_run, blobs):
    _, truth = blobs
    cal = base_run.calibration("consensus")
    assert cal is not None and cal.n_clusters == 3
    state = base_run.selected_state("consensus")
    assert adjusted_rand_index(truth, state.assignment.labels) == 1.0
    assert base_run.status_for("consensus") == "ok"
    # Perfectly stable subsamples: the score sits at its ceiling sqrt(N).
    t = state.tallies
    ceiling = np.sqrt(t.within_cosampled + t.between_cosampled)
    assert cal.value == pytest.approx(ceiling, abs=1e-9)


def test_grid_shapes_and_cell_access(base_run):
    grid = base_run.grid
    assert grid.consensus.shape == (1, 4)
    assert base_run.penalties == (0.0,)
    assert base_run.cluster_counts == (2, 3, 4, 5)
    for gi in range(4):
        state = base_run.state(0, gi)
        assert state.n_clusters == base_run.cluster_counts[gi]
        assert state.counts is not None and state.consensus is not None
        assert state.counts.shape == (24, 24)
        assert np.all(state.consensus >= 0) and np.all(state.consensus <= 1)


def test_grid_delta_and_silhouette_populated(base_run):
    grid = base_run.grid
    assert np.isfinite(grid.delta).all()
    assert np.isfinite(grid.silhouette).all()
    assert np.isfinite(grid.area).all()
    # Perfect 3-cluster structure maximizes the silhouette at g = 3 too.
    assert int(np.nanargmax(grid.silhouette[0])) == 1


def test_timings_and_metadata(base_run):
    assert set(base_run.timings) == {"subsampling", "grid", "total"}
    assert base_run.n_items == 24
    assert base_run.n_attributes == 3
    assert base_run.ranking_kind is None
    assert base_run.attribute_ranking(0) is None
    assert base_run.item_ids == tuple(f"item{i}" for i in range(1, 25))


def test_run_independent_of_n_jobs(blobs):
    X, _ = blobs
    kwargs = dict(
        n_subsamples=10,
        subsample_fraction=0.5,
        master_seed=3,
        cluster_counts=(2, 3),
    )
    one = consensus_run(X, n_jobs=1, **kwargs)
    two = consensus_run(X, n_jobs=2, **kwargs)
    np.testing.assert_array_equal(one.grid.consensus, two.grid.consensus)
    for key in one.states:
        np.testing.assert_array_equal(
            one.states[key].counts, two.states[key].counts
        )
        np.testing.assert_array_equal(
            one.states[key].assignment.labels, two.states[key].assignment.labels
        )


def test_keep_matrices_false_drops_arrays_only(blobs):
    X, _ = blobs
    kwargs = dict(
        n_subsamples=10,
        subsample_fraction=0.5,
        master_seed=3,
        cluster_counts=(2, 3),
    )
    kept = consensus_run(X, keep_matrices=True, **kwargs)
    dropped = consensus_run(X, keep_matrices=False, **kwargs)
    np.testing.assert_array_equal(kept.grid.consensus, dropped.grid.consensus)
    for key in dropped.states:
        assert dropped.states[key].counts is None
        assert dropped.states[key].consensus is None
        np.testing.assert_array_equal(
            kept.states[key].assignment.labels,
            dropped.states[key].assignment.labels,
        )


def test_zero_penalty_matches_unweighted_route(blobs):
    X, _ = blobs
    kwargs = dict(
        n_subsamples=12,
        subsample_fraction=0.5,
        master_seed=11,
        cluster_counts=(2, 3),
    )
    plain = consensus_run(X, method="unweighted", **kwargs)
    for method in ("sparse", "cosa"):
        bypassed = consensus_run(X, method=method, penalties=(0.0,), **kwargs)
        np.testing.assert_array_equal(
            plain.grid.consensus, bypassed.grid.consensus
        )
        for key in plain.states:
            np.testing.assert_array_equal(
                plain.states[key].counts, bypassed.states[key].counts
            )
            np.testing.assert_array_equal(
                plain.states[key].consensus, bypassed.states[key].consensus
            )


def test_weighted_routes_report_rankings(blobs):
    X, _ = blobs
    kwargs = dict(
        n_subsamples=10,
        subsample_fraction=0.5,
        master_seed=2,
        cluster_counts=(2, 3),
    )
    sparse = consensus_run(X, method="sparse", penalties=(1.4,), **kwargs)
    assert sparse.ranking_kind == "selection_proportion"
    ranking = sparse.attribute_ranking(0)
    assert ranking.shape == (3,)
    assert np.all(ranking >= 0) and np.all(ranking <= 1)
    assert 0 in sparse.weight_rows

    cosa = consensus_run(X, method="cosa", penalties=(0.5,), **kwargs)
    assert cosa.ranking_kind == "median_row_weight"
    ranking = cosa.attribute_ranking(0)
    assert ranking.shape == (3,)
    assert np.all(ranking > 0)
    np.testing.assert_array_equal(cosa.grid.weight_converged, [1.0])


def test_delta_requires_consecutive_grid_from_two(blobs):
    X, _ = blobs
    run = consensus_run(
        X,
        n_subsamples=8,
        subsample_fraction=0.5,
        master_seed=7,
        cluster_counts=(2, 4),
    )
    assert np.isnan(run.grid.delta).all()
    assert run.calibration("delta") is None
    assert run.status_for("delta") == "no_stable_structure"
    assert any("consecutive" in w for w in run.warnings)
    # The consensus score is still available.
    assert run.status_for("consensus") == "ok"


def test_run_validation_errors(blobs):
    X, _ = blobs
    with pytest.raises(InputError, match="unweighted route"):
        consensus_run(X, method="unweighted", penalties=(0.5,))
    with pytest.raises(InputError, match="exceed 1"):
        consensus_run(X, method="sparse", penalties=(0.8,))
    with pytest.raises(InputError, match="method"):
        consensus_run(X, method="fancy")
    with pytest.raises(InputError, match="exceeds the"):
        consensus_run(X, cluster_counts=(13,), subsample_fraction=0.5)
    with pytest.raises(InputError, match="pac_bounds"):
        consensus_run(X, pac_bounds=(0.9, 0.1), cluster_counts=(2, 3))
    with pytest.raises(InputError):
        consensus_run(X, cluster_counts=())


def test_default_penalties_per_method():
    assert default_penalties("unweighted") == (0.0,)
    sparse = default_penalties("sparse")
    assert all(v > 1.0 for v in sparse) and len(sparse) == 10
    cosa = default_penalties("cosa")
    assert all(v > 0.0 for v in cosa) and len(cosa) == 10
    with pytest.raises(InputError):
        default_penalties("other")


def test_coverage_warning_surfaced_in_run(blobs):
    X, _ = blobs
    with pytest.warns(CoverageWarning):
        run = consensus_run(
            X,
            n_subsamples=2,
            subsample_fraction=0.5,
            master_seed=0,
            cluster_counts=(2,),
        )
    assert any("never co-sampled" in w for w in run.warnings)


def test_pam_route_runs(blobs):
    X, truth = blobs
    run = consensus_run(
        X,
        algorithm="pam",
        n_subsamples=24,
        subsample_fraction=0.5,
        master_seed=4,
        cluster_counts=(2, 3, 4),
    )
    cal = run.calibration("consensus")
    assert cal.n_clusters == 3
    state = run.selected_state("consensus")
    assert adjusted_rand_index(truth, state.assignment.labels) == 1.0


# ----------------------------------------------------------------- estimator


def test_estimator_fit_and_attributes(blobs):
    X, truth = blobs
    model = ConsensusClustering(
        n_subsamples=24,
        subsample_fraction=0.5,
        random_state=5,
        cluster_counts=(2, 3, 4),
    )
    labels = model.fit_predict(X)
    np.testing.assert_array_equal(labels, model.labels_)
    assert model.n_clusters_ == 3
    assert adjusted_rand_index(truth, labels) == 1.0
    assert model.status_ == "ok"
    assert model.penalty_ == 0.0
    assert model.n_features_in_ == 3
    assert model.consensus_matrix_.shape == (24, 24)
    assert model.co_sampling_.shape == (24, 24)
    assert model.score_ == pytest.approx(model.run_.calibration("consensus").value)
    assert model.attribute_ranking_ is None


def test_estimator_sklearn_protocol(blobs):
    X, _ = blobs
    model = ConsensusClustering(cluster_counts=(2, 3), n_subsamples=8)
    params = model.get_params()
    assert params["cluster_counts"] == (2, 3)
    fresh = clone(model)
    assert fresh.get_params() == params
    fresh.set_params(random_state=9)
    assert fresh.random_state == 9


def test_estimator_standardize_flag():
    rng = np.random.default_rng(6)
    X = np.column_stack(
        [
            np.repeat([0.0, 1.0], 10) + rng.normal(0, 0.05, 20),
            rng.normal(0, 500.0, 20),  # dominates unless standardized
        ]
    )
    raw = ConsensusClustering(
        cluster_counts=(2,), n_subsamples=16, random_state=1
    ).fit(X)
    scaled = ConsensusClustering(
        cluster_counts=(2,), n_subsamples=16, random_state=1, standardize=True
    ).fit(X)
    truth = np.repeat([1, 2], 10)
    assert adjusted_rand_index(truth, scaled.labels_) > adjusted_rand_index(
        truth, raw.labels_
    )


def test_estimator_no_stable_structure(blobs):
    X, _ = blobs
    model = ConsensusClustering(
        cluster_counts=(1,), n_subsamples=6, random_state=0
    ).fit(X)
    assert model.status_ == "no_stable_structure"
    np.testing.assert_array_equal(model.labels_, np.ones(len(X), dtype=np.int64))
    assert model.n_clusters_ is None
    assert model.score_ is None


def test_estimator_validates_calibrate_by(blobs):
    X, _ = blobs
    with pytest.raises(InputError):
        ConsensusClustering(calibrate_by="magic").fit(X)


def test_estimator_calibrates_by_pac(blobs):
    X, truth = blobs
    model = ConsensusClustering(
        calibrate_by="pac",
        cluster_counts=(2, 3, 4),
        n_subsamples=24,
        random_state=5,
    ).fit(X)
    assert model.status_ == "ok"
    assert model.n_clusters_ == 3
    assert adjusted_rand_index(truth, model.labels_) == 1.0
