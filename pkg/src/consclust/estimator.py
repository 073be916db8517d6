"""Estimator-style front end for the consensus grid run."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import as_float_matrix
from .calibration import SCORE_KINDS
from .distance import standardize_columns
from .exceptions import InputError
from .pipeline import consensus_run


class ConsensusClustering(ClusterMixin, BaseEstimator):
    """Consensus clustering with jointly calibrated penalty and cluster count.

    Repeatedly clusters subsamples of the data (optionally after fitting
    attribute weights at each penalty of a grid), aggregates co-membership
    into consensus matrices, scores every (penalty, cluster count) cell,
    and keeps the partition of the winning cell.

    Parameters
    ----------
    method : {"unweighted", "sparse", "cosa"}, default="unweighted"
        Distance weighting route inside each subsample.
    metric : {"squared", "absolute"}, default="squared"
        Per-attribute distance kernel.
    algorithm : {"hierarchical", "pam"}, default="hierarchical"
        Subsample clustering algorithm.
    linkage : {"single", "complete", "average"}, default="complete"
        Agglomeration rule (subsamples and the stable step).
    n_subsamples : int, default=100
        Number of subsamples.
    subsample_fraction : float, default=0.5
        Fraction of items per subsample (floor applied).
    cluster_counts : iterable of int, optional
        Cluster count grid; defaults to 2..20.
    penalties : iterable of float, optional
        Penalty grid; defaults to a method-specific ladder (and 0 for the
        unweighted route).
    calibrate_by : {"consensus", "delta", "pac"}, default="consensus"
        Score used to pick the reported cell.
    pac_bounds : pair of float, default=(0.1, 0.9)
        Ambiguity interval for the PAC score.
    compute_silhouette : bool, default=False
        Also record a silhouette column in the score grid.
    standardize : bool, default=False
        Z-score columns before clustering.
    random_state : int, default=0
        Master seed for the subsample draw.
    n_jobs : int, default=1
        Worker processes; results are identical for every value.
    keep_matrices : bool, default=True
        Retain per-cell count and consensus matrices on the result.

    Attributes
    ----------
    labels_ : ndarray
        Stable partition of the winning cell (all ones when no cell
        qualifies).
    n_clusters_, penalty_, score_ :
        Winning cell coordinates and its score; None when no cell
        qualifies.
    status_ : str
        "ok" or "no_stable_structure".
    consensus_matrix_ : ndarray or None
        Consensus proportions of the winning cell (requires
        keep_matrices=True).
    co_sampling_ : ndarray
        Times each item pair was drawn together.
    score_grid_ : ScoreGrid
        Scores of every grid cell.
    attribute_ranking_ : ndarray or None
        Aggregated attribute relevance at the winning penalty (weighted
        routes only).
    run_ : ConsensusRun
        The full underlying result.
    """

    def __init__(
        self,
        method: str = "unweighted",
        metric: str = "squared",
        algorithm: str = "hierarchical",
        linkage: str = "complete",
        n_subsamples: int = 100,
        subsample_fraction: float = 0.5,
        cluster_counts=None,
        penalties=None,
        calibrate_by: str = "consensus",
        pac_bounds=(0.1, 0.9),
        compute_silhouette: bool = False,
        standardize: bool = False,
        random_state: int = 0,
        n_jobs: int = 1,
        keep_matrices: bool = True,
    ):
        self.method = method
        self.metric = metric
        self.algorithm = algorithm
        self.linkage = linkage
        self.n_subsamples = n_subsamples
        self.subsample_fraction = subsample_fraction
        self.cluster_counts = cluster_counts
        self.penalties = penalties
        self.calibrate_by = calibrate_by
        self.pac_bounds = pac_bounds
        self.compute_silhouette = compute_silhouette
        self.standardize = standardize
        self.random_state = random_state
        self.n_jobs = n_jobs
        self.keep_matrices = keep_matrices

    def fit(self, X, y=None):
        """Run the grid and keep the calibrated partition."""
        del y
        if self.calibrate_by not in SCORE_KINDS:
            raise InputError(
                f"calibrate_by must be one of {SCORE_KINDS},"
                f" got {self.calibrate_by!r}"
            )
        values = as_float_matrix(X, "X")
        if self.standardize:
            values = standardize_columns(values)
        run = consensus_run(
            values,
            method=self.method,
            metric=self.metric,
            algorithm=self.algorithm,
            linkage=self.linkage,
            n_subsamples=self.n_subsamples,
            subsample_fraction=self.subsample_fraction,
            master_seed=self.random_state,
            cluster_counts=self.cluster_counts,
            penalties=self.penalties,
            pac_bounds=self.pac_bounds,
            compute_silhouette=self.compute_silhouette,
            n_jobs=self.n_jobs,
            keep_matrices=self.keep_matrices,
        )
        self.run_ = run
        self.n_features_in_ = values.shape[1]
        self.co_sampling_ = run.subsamples.co_sampling
        self.score_grid_ = run.grid
        selection = run.calibration(self.calibrate_by)
        if selection is None:
            self.status_ = "no_stable_structure"
            self.labels_ = np.ones(values.shape[0], dtype=np.int64)
            self.n_clusters_ = None
            self.penalty_ = None
            self.score_ = None
            self.consensus_matrix_ = None
            self.attribute_ranking_ = None
            return self
        state = run.state(selection.penalty_index, selection.cluster_index)
        self.status_ = "ok"
        self.labels_ = state.assignment.labels
        self.n_clusters_ = selection.n_clusters
        self.penalty_ = selection.penalty
        self.score_ = selection.value
        self.consensus_matrix_ = state.consensus
        self.attribute_ranking_ = run.attribute_ranking(selection.penalty_index)
        return self
