"""Subsampled co-membership accumulation and the consensus matrix.

The subsample set (and with it the co-sampling count matrix H) depends only
on (n, K, fraction, master seed), never on the clustering configuration, so
one draw is shared across every point of a calibration grid.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from ._validation import check_fraction, check_positive_int, check_seed
from .cluster import ClusterAssignment, cut, hierarchical
from .exceptions import ClusteringError, CoverageWarning, InputError
from .seeding import stream


@dataclass(frozen=True)
class SubsampleSet:
    """K index subsets of size floor(fraction*n), without replacement."""

    n_items: int
    fraction: float
    master_seed: int
    indices: tuple[np.ndarray, ...]
    co_sampling: np.ndarray  # H: times each pair (and item, on the diagonal) drawn

    @property
    def n_subsamples(self) -> int:
        return len(self.indices)

    @property
    def size(self) -> int:
        return self.indices[0].size


@dataclass(frozen=True)
class SubsampleFit:
    """Per-subsample weight fit summary (None fields on the unweighted route)."""

    weights: np.ndarray | None
    converged: bool
    n_iter: int


def draw_subsamples(
    n_items: int, n_subsamples: int, fraction: float, master_seed: int
) -> SubsampleSet:
    """Draw the shared subsample set.

    Subsample k is produced by its own generator spawned from the master
    seed with spawn key (k,), so the set is reproducible item-for-item and
    independent of how later clustering work is scheduled.
    """
    n_items = check_positive_int(n_items, "n_items", minimum=2)
    n_subsamples = check_positive_int(n_subsamples, "n_subsamples")
    fraction = check_fraction(fraction, "fraction")
    master_seed = check_seed(master_seed, "master_seed")
    size = int(np.floor(fraction * n_items))
    if size < 2:
        raise InputError(
            f"subsample size floor({fraction} * {n_items}) = {size} is too small;"
            " need at least 2 items per subsample"
        )
    indices = []
    co_sampling = np.zeros((n_items, n_items), dtype=np.int32)
    for k in range(n_subsamples):
        rng = stream(master_seed, k)
        idx = np.sort(rng.choice(n_items, size=size, replace=False))
        idx = idx.astype(np.int32)
        indices.append(idx)
        co_sampling[np.ix_(idx, idx)] += 1
    return SubsampleSet(
        n_items=n_items,
        fraction=fraction,
        master_seed=master_seed,
        indices=tuple(indices),
        co_sampling=co_sampling,
    )


def _run_subsample(cluster_fn, k: int, idx: np.ndarray):
    # Single-threaded BLAS inside each task: results must not depend on how
    # many workers (or BLAS threads) happen to be available.
    try:
        with threadpool_limits(limits=1):
            return cluster_fn(idx)
    except Exception as exc:  # noqa: BLE001 - annotate with the subsample index
        raise ClusteringError(f"clustering failed on subsample {k}: {exc}") from exc


def accumulate_comembership(
    subsamples: SubsampleSet,
    cluster_fn,
    cluster_grid,
    n_jobs: int = 1,
):
    """Run `cluster_fn` on every subsample and count co-memberships.

    Parameters
    ----------
    subsamples : SubsampleSet
        Shared subsample draw.
    cluster_fn : callable
        Maps an item index array to ``(labels, fit)`` where ``labels`` has
        shape (len(cluster_grid), subsample size) with labels 1..g per row,
        and ``fit`` is a SubsampleFit.
    cluster_grid : sequence of int
        Cluster counts, one labels row per entry.
    n_jobs : int
        Worker processes; 1 runs inline. Counts are accumulated in grid
        order after all tasks finish, so results never depend on n_jobs.

    Returns
    -------
    counts : dict[int, np.ndarray]
        Per cluster count g, the integer matrix C with
        C_ij = number of subsamples where i and j were drawn together and
        assigned to the same cluster. C_ii equals H_ii.
    fits : list[SubsampleFit]
        One entry per subsample.
    """
    cluster_grid = [check_positive_int(g, "cluster count") for g in cluster_grid]
    n = subsamples.n_items
    if n_jobs == 1:
        results = [
            _run_subsample(cluster_fn, k, idx)
            for k, idx in enumerate(subsamples.indices)
        ]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_subsample)(cluster_fn, k, idx)
            for k, idx in enumerate(subsamples.indices)
        )
    counts = {g: np.zeros((n, n), dtype=np.int32) for g in cluster_grid}
    fits: list[SubsampleFit] = []
    for k, (labels, fit) in enumerate(results):
        idx = subsamples.indices[k]
        labels = np.asarray(labels)
        if labels.shape != (len(cluster_grid), idx.size):
            raise ClusteringError(
                f"subsample {k}: expected labels of shape"
                f" ({len(cluster_grid)}, {idx.size}), got {labels.shape}"
            )
        block = np.ix_(idx, idx)
        for gi, g in enumerate(cluster_grid):
            row = labels[gi]
            counts[g][block] += row[:, None] == row[None, :]
        fits.append(fit)
    return counts, fits


def consensus_matrix(counts: np.ndarray, co_sampling: np.ndarray) -> np.ndarray:
    """Consensus proportions: counts / co-sampling, 0 where never co-sampled.

    Emits a CoverageWarning when some off-diagonal pair was never drawn
    together; those entries carry no evidence and are set to 0.
    """
    C = np.asarray(counts)
    H = np.asarray(co_sampling)
    if C.shape != H.shape or C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InputError("counts and co-sampling must be square with equal shape")
    if np.any(C < 0) or np.any(H < 0):
        raise InputError("counts must be non-negative")
    if np.any(C > H):
        raise InputError("co-membership counts exceed co-sampling counts")
    if not np.array_equal(np.diag(C), np.diag(H)):
        raise InputError("diagonal of counts must equal diagonal of co-sampling")
    uncovered = (H == 0) & ~np.eye(H.shape[0], dtype=bool)
    if np.any(uncovered):
        rows, cols = np.nonzero(np.triu(uncovered, k=1))
        pairs = list(zip(rows.tolist(), cols.tolist()))
        shown = ", ".join(f"({i}, {j})" for i, j in pairs[:20])
        extra = "" if len(pairs) <= 20 else f" and {len(pairs) - 20} more"
        warnings.warn(
            f"{len(pairs)} item pair(s) were never co-sampled: {shown}{extra};"
            " their consensus is set to 0",
            CoverageWarning,
            stacklevel=2,
        )
    gamma = np.zeros(C.shape, dtype=np.float64)
    np.divide(C, H, out=gamma, where=H > 0)
    return gamma


def stable_clusters(
    gamma: np.ndarray, n_clusters: int, linkage: str = "complete"
) -> ClusterAssignment:
    """Final partition: agglomerate 1 - gamma and cut at n_clusters."""
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise InputError("consensus matrix must be square")
    if np.any(gamma < -1e-12) or np.any(gamma > 1.0 + 1e-12):
        raise InputError("consensus proportions must lie in [0, 1]")
    dist = 1.0 - gamma
    np.maximum(dist, 0.0, out=dist)
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    dendrogram = hierarchical(dist, linkage=linkage)
    return cut(dendrogram, n_clusters)
