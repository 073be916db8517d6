"""Gaussian cluster data with exact per-attribute explained variance.

Items fall into fixed-size clusters. Each attribute j gets cluster means
scaled so the sample variance (ddof=1) of the mean column is exactly the
requested explained share E_j, and noise with variance 1 - E_j, so every
attribute has unit total variance in expectation. Noise is either
independent across attributes or correlated inside contiguous attribute
blocks through a random sparse precision graph.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from ._validation import check_positive_int, check_seed
from .cluster import ClusterAssignment
from .distance import DataMatrix
from .exceptions import InputError, NumericalError
from .seeding import derived_seed, stream

_REDRAW_CAP = 100


@dataclass(frozen=True)
class BlockCorrelation:
    """Contiguous attribute blocks with graph-structured correlation.

    Block sizes are drawn uniformly from `size_range`. Inside a block, a
    random spanning tree plus independent extra edges (probability
    `extra_edge_prob` each) defines a precision matrix with -edge_weight on
    edges and diagonally dominant diagonal (row absolute sum plus
    `diagonal_boost`); its inverse is rescaled to a correlation matrix.
    """

    size_range: tuple[int, int] = (3, 10)
    edge_weight: float = 0.5
    extra_edge_prob: float = 0.1
    diagonal_boost: float = 0.1

    def __post_init__(self):
        lo, hi = self.size_range
        if not (1 <= lo <= hi):
            raise InputError(f"invalid block size range {self.size_range}")
        if self.edge_weight <= 0:
            raise InputError("edge_weight must be positive")
        if not 0.0 <= self.extra_edge_prob <= 1.0:
            raise InputError("extra_edge_prob must lie in [0, 1]")
        if self.diagonal_boost <= 0:
            raise InputError("diagonal_boost must be positive")


@dataclass(frozen=True)
class SimulationSpec:
    cluster_sizes: tuple[int, ...]
    explained: np.ndarray  # E_j in [0, 1], one entry per attribute
    correlation: BlockCorrelation | None = None  # None: independent noise
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(
            check_positive_int(s, "cluster size") for s in self.cluster_sizes
        )
        object.__setattr__(self, "cluster_sizes", sizes)
        explained = np.asarray(self.explained, dtype=np.float64)
        if explained.ndim != 1 or explained.size < 1:
            raise InputError("explained must be a 1-d vector with >= 1 entry")
        if np.any(explained < 0) or np.any(explained > 1):
            raise InputError("explained shares must lie in [0, 1]")
        object.__setattr__(self, "explained", explained)
        if sum(sizes) < 2:
            raise InputError("need at least 2 items in total")
        if np.any(explained > 0) and len(sizes) < 2:
            raise InputError(
                "explained share > 0 requires at least 2 clusters to separate"
            )
        object.__setattr__(self, "seed", check_seed(self.seed))

    @classmethod
    def uniform(
        cls,
        cluster_sizes,
        n_attributes: int,
        explained: float,
        contributing: int | None = None,
        correlation: BlockCorrelation | None = None,
        seed: int = 0,
    ) -> "SimulationSpec":
        """Flat explained share on the first `contributing` attributes
        (all of them when None), zero elsewhere."""
        n_attributes = check_positive_int(n_attributes, "n_attributes")
        vec = np.zeros(n_attributes)
        top = n_attributes if contributing is None else int(contributing)
        if not 0 <= top <= n_attributes:
            raise InputError(
                f"contributing must lie in 0..{n_attributes}, got {contributing}"
            )
        vec[:top] = float(explained)
        return cls(
            cluster_sizes=tuple(cluster_sizes),
            explained=vec,
            correlation=correlation,
            seed=seed,
        )

    @property
    def n_items(self) -> int:
        return int(sum(self.cluster_sizes))

    @property
    def n_attributes(self) -> int:
        return int(self.explained.size)

    @property
    def truth(self) -> ClusterAssignment:
        labels = np.repeat(
            np.arange(1, len(self.cluster_sizes) + 1), self.cluster_sizes
        )
        return ClusterAssignment(labels=labels, n_clusters=len(self.cluster_sizes))


@dataclass(frozen=True)
class SimulatedDataset:
    data: DataMatrix
    truth: ClusterAssignment
    means: np.ndarray
    covariance: np.ndarray
    spec: SimulationSpec
    contributing: tuple[int, ...] = field(default_factory=tuple)


def simulate_means(truth, explained, seed: int) -> np.ndarray:
    """Cluster mean columns with exact sample variance.

    For each attribute, one standard normal value per cluster is expanded
    to items, centered, and rescaled so the column's sample variance
    (ddof=1) is exactly the explained share; zero-share columns are zero.
    A column that comes out constant (no spread to rescale) is redrawn, up
    to a cap.
    """
    labels = truth.labels if hasattr(truth, "labels") else np.asarray(truth)
    explained = np.asarray(explained, dtype=np.float64)
    n = labels.size
    n_groups = int(labels.max())
    p = explained.size
    rng = stream(seed)
    draws = rng.standard_normal((n_groups, p))
    means = np.zeros((n, p))
    for j in range(p):
        share = explained[j]
        if share == 0.0:
            continue
        column = draws[labels - 1, j]
        for attempt in range(_REDRAW_CAP + 1):
            centered = column - column.mean()
            sd = centered.std(ddof=1)
            if sd > 0.0:
                break
            if attempt == _REDRAW_CAP:
                raise NumericalError(
                    f"attribute {j}: cluster means constant after"
                    f" {_REDRAW_CAP} redraws"
                )
            column = rng.standard_normal(n_groups)[labels - 1]
        means[:, j] = centered * (np.sqrt(share) / sd)
    return means


def _block_sizes(p: int, rng: np.random.Generator, size_range) -> list[int]:
    lo, hi = size_range
    sizes: list[int] = []
    total = 0
    while total < p:
        size = int(rng.integers(lo, hi + 1))
        size = min(size, p - total)
        sizes.append(size)
        total += size
    return sizes


def _block_correlation(size: int, rng: np.random.Generator, model: BlockCorrelation):
    precision = np.zeros((size, size))
    edges = set()
    for v in range(1, size):  # random spanning tree over the block
        u = int(rng.integers(0, v))
        edges.add((u, v))
    for u in range(size):
        for v in range(u + 1, size):
            if (u, v) not in edges and rng.random() < model.extra_edge_prob:
                edges.add((u, v))
    for u, v in edges:
        precision[u, v] = precision[v, u] = -model.edge_weight
    diag = np.abs(precision).sum(axis=1) + model.diagonal_boost
    precision[np.diag_indices(size)] = diag
    cov = np.linalg.inv(precision)
    scale = np.sqrt(np.diag(cov))
    return cov / np.outer(scale, scale)


def simulate_covariance(
    n_attributes: int,
    explained,
    correlation: BlockCorrelation | None,
    seed: int,
) -> np.ndarray:
    """Noise covariance with per-attribute variance 1 - E_j.

    The base correlation (identity, or block-structured) is rescaled by
    sqrt((1 - E_i)(1 - E_j)); being a congruence, this preserves positive
    semidefiniteness.
    """
    n_attributes = check_positive_int(n_attributes, "n_attributes")
    explained = np.asarray(explained, dtype=np.float64)
    if explained.shape != (n_attributes,):
        raise InputError("explained must have one entry per attribute")
    base = np.eye(n_attributes)
    if correlation is not None:
        rng = stream(seed)
        start = 0
        for size in _block_sizes(n_attributes, rng, correlation.size_range):
            stop = start + size
            if size > 1:
                base[start:stop, start:stop] = _block_correlation(
                    size, rng, correlation
                )
            start = stop
    scale = np.sqrt(1.0 - explained)
    cov = base * np.outer(scale, scale)
    # The base correlation has a unit diagonal, so the congruence puts
    # exactly 1 - E_j there; write that value directly instead of the
    # one-ulp-off product sqrt(1 - E_j)^2.
    cov[np.diag_indices_from(cov)] = 1.0 - explained
    return cov


def _noise_factor(covariance: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        values, vectors = np.linalg.eigh(covariance)
        clipped = np.maximum(values, 1e-10)
        warnings.warn(
            "noise covariance was not positive definite;"
            " eigenvalues clipped at 1e-10",
            RuntimeWarning,
            stacklevel=3,
        )
        return vectors * np.sqrt(clipped)


def simulate_dataset(spec: SimulationSpec) -> SimulatedDataset:
    """Draw one dataset: X = cluster means + correlated Gaussian noise.

    The three stages (means, covariance structure, noise) consume seeds
    derived from spec.seed with distinct spawn keys, so the same spec
    reproduces the same matrices bit for bit.
    """
    truth = spec.truth
    n, p = spec.n_items, spec.n_attributes
    with threadpool_limits(limits=1):
        means = simulate_means(truth, spec.explained, seed=derived_seed(spec.seed, 0))
        covariance = simulate_covariance(
            p, spec.explained, spec.correlation, seed=derived_seed(spec.seed, 1)
        )
        factor = _noise_factor(covariance)
        noise = stream(spec.seed, 2).standard_normal((n, p)) @ factor.T
    values = means + noise
    data = DataMatrix.from_values(values)
    contributing = tuple(int(j) for j in np.nonzero(spec.explained > 0)[0])
    return SimulatedDataset(
        data=data,
        truth=truth,
        means=means,
        covariance=covariance,
        spec=spec,
        contributing=contributing,
    )
