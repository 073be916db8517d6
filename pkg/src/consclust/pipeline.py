"""End-to-end consensus run over a (penalty, cluster count) grid.

One subsample draw is shared by every grid cell. For each penalty, every
subsample is (optionally weight-fitted and) clustered once per cluster
count; co-membership counts become consensus matrices, stable partitions,
and scores. Calibration then picks the preferred cell per score kind.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import as_float_matrix, check_fraction, check_positive_int
from .calibration import (
    CalibrationResult,
    ScoreGrid,
    ScoreTallies,
    calibrate,
    cdf_area,
    consensus_score,
    delta_scores,
    pac_score,
    silhouette_score,
    tally,
)
from .cluster import LINKAGES, ClusterAssignment, cut, hierarchical, pam
from .consensus import (
    SubsampleFit,
    SubsampleSet,
    accumulate_comembership,
    consensus_matrix,
    draw_subsamples,
    stable_clusters,
)
from .distance import (
    METRICS,
    PerAttributeDistance,
    fit_cosa_weights,
    fit_sparse_weights,
    pairwise_distance,
)
from .exceptions import CoverageWarning, InputError

METHODS = ("unweighted", "sparse", "cosa")
ALGORITHMS = ("hierarchical", "pam")

DEFAULT_CLUSTER_COUNTS = tuple(range(2, 21))
DEFAULT_SPARSE_PENALTIES = tuple(np.geomspace(1.1, 10.0, 10))
DEFAULT_COSA_PENALTIES = tuple(np.geomspace(0.1, 10.0, 10))


def default_penalties(method: str) -> tuple[float, ...]:
    if method == "unweighted":
        return (0.0,)
    if method == "sparse":
        return DEFAULT_SPARSE_PENALTIES
    if method == "cosa":
        return DEFAULT_COSA_PENALTIES
    raise InputError(f"method must be one of {METHODS}, got {method!r}")


@dataclass(frozen=True)
class ConsensusState:
    """Everything retained about one grid cell."""

    penalty: float
    n_clusters: int
    assignment: ClusterAssignment
    tallies: ScoreTallies
    counts: np.ndarray | None = None  # co-membership counts C
    consensus: np.ndarray | None = None  # proportions C/H


class _SubsampleWorker:
    """Clusters one subsample at one penalty for every cluster count.

    Instances are plain data so joblib can ship them to worker processes.
    """

    def __init__(
        self,
        values: np.ndarray,
        method: str,
        metric: str,
        penalty: float,
        cluster_counts: tuple[int, ...],
        algorithm: str,
        linkage: str,
    ):
        self.values = values
        self.method = method
        self.metric = metric
        self.penalty = penalty
        self.cluster_counts = cluster_counts
        self.algorithm = algorithm
        self.linkage = linkage

    def __call__(self, idx: np.ndarray):
        sub = self.values[idx]
        pad = PerAttributeDistance(sub, self.metric)
        summary = None
        converged = True
        n_iter = 0
        if self.method == "unweighted" or self.penalty == 0.0:
            # Zero penalty bypasses weighting entirely on every route.
            dist = pad.total()
        elif self.method == "sparse":
            fit = fit_sparse_weights(pad, self.penalty)
            dist = pad.weighted(fit.values)
            summary, converged, n_iter = fit.values, fit.converged, fit.n_iter
        else:
            fit = fit_cosa_weights(pad, self.penalty)
            dist = pad.max_weighted(fit.values)
            summary = np.median(fit.values, axis=0)
            converged, n_iter = fit.converged, fit.n_iter
        if self.algorithm == "hierarchical":
            dendrogram = hierarchical(dist, self.linkage)
            rows = [cut(dendrogram, g).labels for g in self.cluster_counts]
        else:
            rows = [pam(dist, g).labels for g in self.cluster_counts]
        labels = np.stack(rows).astype(np.int16)
        return labels, SubsampleFit(weights=summary, converged=converged, n_iter=n_iter)


@dataclass
class ConsensusRun:
    """Result of one grid run; states are keyed by (penalty, cluster) index."""

    method: str
    metric: str
    algorithm: str
    linkage: str
    penalties: tuple[float, ...]
    cluster_counts: tuple[int, ...]
    pac_bounds: tuple[float, float]
    subsamples: SubsampleSet
    grid: ScoreGrid
    states: dict[tuple[int, int], ConsensusState]
    calibrations: dict[str, CalibrationResult | None]
    weight_rows: dict[int, np.ndarray]  # penalty index -> (K, p) fit summaries
    item_ids: tuple[str, ...]
    n_attributes: int = 0
    warnings: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def n_items(self) -> int:
        return self.subsamples.n_items

    def state(self, penalty_index: int, cluster_index: int) -> ConsensusState:
        return self.states[(penalty_index, cluster_index)]

    def calibration(self, kind: str) -> CalibrationResult | None:
        if kind not in self.calibrations:
            raise InputError(
                f"score kind must be one of {tuple(self.calibrations)}, got {kind!r}"
            )
        return self.calibrations[kind]

    def status_for(self, kind: str) -> str:
        return "ok" if self.calibration(kind) is not None else "no_stable_structure"

    def selected_state(self, kind: str) -> ConsensusState | None:
        cal = self.calibration(kind)
        if cal is None:
            return None
        return self.state(cal.penalty_index, cal.cluster_index)

    @property
    def ranking_kind(self) -> str | None:
        if self.method == "sparse":
            return "selection_proportion"
        if self.method == "cosa":
            return "median_row_weight"
        return None

    def attribute_ranking(self, penalty_index: int) -> np.ndarray | None:
        """Attribute relevance at one penalty, aggregated over subsamples.

        Sparse route: fraction of subsamples selecting each attribute.
        Row-weight route: per-attribute median of the per-subsample medians.
        """
        rows = self.weight_rows.get(penalty_index)
        if rows is None:
            return None
        if self.method == "sparse":
            return (rows > 0).mean(axis=0)
        return np.median(rows, axis=0)


def _check_choice(value: str, choices: tuple[str, ...], name: str) -> str:
    if value not in choices:
        raise InputError(f"{name} must be one of {choices}, got {value!r}")
    return value


def _check_penalties(method: str, penalties) -> tuple[float, ...]:
    if penalties is None:
        return default_penalties(method)
    values = tuple(sorted({float(v) for v in penalties}))
    if not values:
        raise InputError("need at least one penalty")
    for v in values:
        if not np.isfinite(v) or v < 0:
            raise InputError(f"penalties must be finite and >= 0, got {v}")
        if v == 0.0:
            continue  # explicit unweighted bypass
        if method == "unweighted":
            raise InputError(
                "the unweighted route admits only the zero penalty,"
                f" got {v}"
            )
        if method == "sparse" and v <= 1.0:
            raise InputError(
                f"sparse penalties must exceed 1 (or be 0 to bypass), got {v}"
            )
    return values


def _check_cluster_counts(cluster_counts) -> tuple[int, ...]:
    if cluster_counts is None:
        return DEFAULT_CLUSTER_COUNTS
    values = tuple(
        sorted({check_positive_int(g, "cluster count") for g in cluster_counts})
    )
    if not values:
        raise InputError("need at least one cluster count")
    return values


def consensus_run(
    data,
    *,
    method: str = "unweighted",
    metric: str = "squared",
    algorithm: str = "hierarchical",
    linkage: str = "complete",
    n_subsamples: int = 100,
    subsample_fraction: float = 0.5,
    master_seed: int = 0,
    cluster_counts=None,
    penalties=None,
    pac_bounds: tuple[float, float] = (0.1, 0.9),
    compute_silhouette: bool = False,
    n_jobs: int = 1,
    keep_matrices: bool = True,
) -> ConsensusRun:
    """Run the full consensus grid on an items-by-attributes matrix.

    Parameters
    ----------
    data : array or DataMatrix
        Items in rows, attributes in columns.
    method : {"unweighted", "sparse", "cosa"}
        Distance weighting route applied inside each subsample.
    metric : {"squared", "absolute"}
        Per-attribute distance kernel.
    algorithm : {"hierarchical", "pam"}
        Subsample clustering algorithm. The final stable partition always
        comes from agglomerating 1 - consensus.
    linkage : {"single", "complete", "average"}
        Linkage for agglomeration (subsamples and stable step).
    n_subsamples, subsample_fraction, master_seed :
        Subsampling design; the draw is independent of method and grids.
    cluster_counts, penalties :
        Grid axes; defaults are 2..20 and a method-specific penalty ladder.
    pac_bounds : (float, float)
        Ambiguity interval for the PAC score.
    compute_silhouette : bool
        Also score each cell by the silhouette of its stable partition on
        the unweighted full-data distance.
    n_jobs : int
        Worker processes for subsample clustering. Results are identical
        for every value; BLAS threading is pinned inside workers.
    keep_matrices : bool
        Keep per-cell count and consensus matrices (memory scales with
        grid size times n^2).

    Returns
    -------
    ConsensusRun
    """
    item_ids: tuple[str, ...] | None = None
    if hasattr(data, "values") and hasattr(data, "item_ids"):
        item_ids = tuple(data.item_ids)
        values = data.values
    else:
        values = data
    values = as_float_matrix(values, "data")
    n, p = values.shape
    if item_ids is None:
        item_ids = tuple(f"item{i + 1}" for i in range(n))
    method = _check_choice(method, METHODS, "method")
    metric = _check_choice(metric, METRICS, "metric")
    algorithm = _check_choice(algorithm, ALGORITHMS, "algorithm")
    linkage = _check_choice(linkage, LINKAGES, "linkage")
    n_subsamples = check_positive_int(n_subsamples, "n_subsamples")
    subsample_fraction = check_fraction(subsample_fraction, "subsample_fraction")
    cluster_counts = _check_cluster_counts(cluster_counts)
    penalties = _check_penalties(method, penalties)
    lower, upper = float(pac_bounds[0]), float(pac_bounds[1])
    if not 0.0 <= lower < upper <= 1.0:
        raise InputError(
            f"pac_bounds must satisfy 0 <= lower < upper <= 1, got {pac_bounds}"
        )
    size = int(np.floor(subsample_fraction * n))
    if max(cluster_counts) > size:
        raise InputError(
            f"largest cluster count {max(cluster_counts)} exceeds the"
            f" subsample size {size}"
        )

    run_warnings: list[str] = []
    timings: dict[str, float] = {}
    t_total = time.perf_counter()
    with threadpool_limits(limits=1):
        t0 = time.perf_counter()
        subsamples = draw_subsamples(n, n_subsamples, subsample_fraction, master_seed)
        timings["subsampling"] = time.perf_counter() - t0

        co = subsamples.co_sampling
        uncovered = int(np.triu((co == 0), k=1).sum())
        if uncovered:
            message = (
                f"{uncovered} item pair(s) were never co-sampled; their"
                " consensus proportions carry no evidence"
            )
            run_warnings.append(message)
            warnings.warn(message, CoverageWarning, stacklevel=2)

        full_dist = (
            pairwise_distance(values, metric) if compute_silhouette else None
        )

        L, M = len(penalties), len(cluster_counts)
        shape = (L, M)
        score_c = np.full(shape, -np.inf)
        delta = np.full(shape, np.nan)
        pac = np.full(shape, np.nan)
        silh = np.full(shape, np.nan)
        area = np.full(shape, np.nan)
        x_w = np.zeros(shape, dtype=np.int64)
        n_w = np.zeros(shape, dtype=np.int64)
        x_b = np.zeros(shape, dtype=np.int64)
        n_b = np.zeros(shape, dtype=np.int64)
        weight_converged = np.ones(L)
        states: dict[tuple[int, int], ConsensusState] = {}
        weight_rows: dict[int, np.ndarray] = {}

        consecutive = cluster_counts == tuple(
            range(2, 2 + len(cluster_counts))
        )
        if not consecutive:
            run_warnings.append(
                "relative-gain score unavailable: cluster counts are not"
                " consecutive from 2"
            )

        t0 = time.perf_counter()
        for li, penalty in enumerate(penalties):
            worker = _SubsampleWorker(
                values, method, metric, penalty, cluster_counts, algorithm, linkage
            )
            counts_by_g, fits = accumulate_comembership(
                subsamples, worker, cluster_counts, n_jobs=n_jobs
            )
            if method != "unweighted" and penalty != 0.0:
                weight_converged[li] = float(
                    np.mean([fit.converged for fit in fits])
                )
                weight_rows[li] = np.stack([fit.weights for fit in fits])
            areas_by_g: dict[int, float] = {}
            for gi, g in enumerate(cluster_counts):
                counts = counts_by_g[g]
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", CoverageWarning)
                    gamma = consensus_matrix(counts, co)
                assignment = stable_clusters(gamma, g, linkage)
                tallies = tally(counts, co, assignment)
                score_c[li, gi] = consensus_score(tallies)
                area[li, gi] = cdf_area(gamma)
                areas_by_g[g] = area[li, gi]
                pac[li, gi] = pac_score(gamma, lower, upper)
                x_w[li, gi] = tallies.within_comembers
                n_w[li, gi] = tallies.within_cosampled
                x_b[li, gi] = tallies.between_comembers
                n_b[li, gi] = tallies.between_cosampled
                if compute_silhouette and g >= 2:
                    silh[li, gi] = silhouette_score(full_dist, assignment)
                states[(li, gi)] = ConsensusState(
                    penalty=penalty,
                    n_clusters=g,
                    assignment=assignment,
                    tallies=tallies,
                    counts=counts if keep_matrices else None,
                    consensus=gamma if keep_matrices else None,
                )
            if consecutive:
                by_g = delta_scores(areas_by_g)
                for gi, g in enumerate(cluster_counts):
                    delta[li, gi] = by_g[g]
        timings["grid"] = time.perf_counter() - t0

        grid = ScoreGrid(
            penalties=penalties,
            cluster_counts=cluster_counts,
            consensus=score_c,
            delta=delta,
            pac=pac,
            silhouette=silh,
            area=area,
            within_comembers=x_w,
            within_cosampled=n_w,
            between_comembers=x_b,
            between_cosampled=n_b,
            weight_converged=weight_converged,
        )
        calibrations = {kind: calibrate(grid, kind) for kind in ("consensus", "delta", "pac")}
    timings["total"] = time.perf_counter() - t_total
    return ConsensusRun(
        method=method,
        metric=metric,
        algorithm=algorithm,
        linkage=linkage,
        penalties=penalties,
        cluster_counts=cluster_counts,
        pac_bounds=(float(lower), float(upper)),
        subsamples=subsamples,
        grid=grid,
        states=states,
        calibrations=calibrations,
        weight_rows=weight_rows,
        item_ids=item_ids,
        n_attributes=p,
        warnings=run_warnings,
        timings=timings,
    )
