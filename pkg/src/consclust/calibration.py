"""Stability scores over a (penalty, cluster count) grid and grid selection.

The headline score is a two-proportion z statistic contrasting observed
co-membership rates inside and between the stable clusters: with X_w
co-membership events over N_w co-sampled within-cluster pairs and X_b over
N_b between-cluster pairs,

    score = (X_w/N_w - X_b/N_b) / sqrt(p0 (1 - p0) (1/N_w + 1/N_b)),

p0 = (X_w + X_b)/(N_w + N_b). Its maximum over the open domain is
sqrt(N_w + N_b), attained exactly at (X_w, X_b) = (N_w, 0); it is
non-decreasing in X_w and non-increasing in X_b. Degenerate tallies
(N_w = 0, N_b = 0, or a pooled rate of 0 or 1) score -inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_distance_matrix, check_labels
from .exceptions import InputError

SCORE_KINDS = ("consensus", "delta", "pac")


@dataclass(frozen=True)
class ScoreTallies:
    """Indicator-masked sums over distinct pairs i < j."""

    within_comembers: int  # X_w: co-membership events on within-cluster pairs
    within_cosampled: int  # N_w: co-sampling events on within-cluster pairs
    between_comembers: int  # X_b
    between_cosampled: int  # N_b

    def __post_init__(self):
        if not (0 <= self.within_comembers <= self.within_cosampled):
            raise InputError("within tallies out of order")
        if not (0 <= self.between_comembers <= self.between_cosampled):
            raise InputError("between tallies out of order")


def tally(counts, co_sampling, assignment) -> ScoreTallies:
    """Split co-membership and co-sampling totals by the stable partition."""
    C = np.asarray(counts)
    H = np.asarray(co_sampling)
    labels = assignment.labels if hasattr(assignment, "labels") else assignment
    labels = check_labels(labels, n=C.shape[0], name="assignment")
    if C.shape != H.shape or C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise InputError("counts and co-sampling must be square with equal shape")
    same = labels[:, None] == labels[None, :]
    upper = np.triu(np.ones_like(same, dtype=bool), k=1)
    within = same & upper
    between = ~same & upper
    return ScoreTallies(
        within_comembers=int(C[within].sum()),
        within_cosampled=int(H[within].sum()),
        between_comembers=int(C[between].sum()),
        between_cosampled=int(H[between].sum()),
    )


def consensus_score(tallies: ScoreTallies) -> float:
    """Two-proportion z contrast of within- vs between-cluster co-membership.

    Returns -inf for degenerate tallies, so degenerate grid cells never win
    a maximization.
    """
    x_w, n_w = tallies.within_comembers, tallies.within_cosampled
    x_b, n_b = tallies.between_comembers, tallies.between_cosampled
    if n_w == 0 or n_b == 0:
        return -math.inf
    pooled = (x_w + x_b) / (n_w + n_b)
    if pooled <= 0.0 or pooled >= 1.0:
        return -math.inf
    rate_w = x_w / n_w
    rate_b = x_b / n_b
    return (rate_w - rate_b) / math.sqrt(
        pooled * (1.0 - pooled) * (1.0 / n_w + 1.0 / n_b)
    )


def _offdiagonal(gamma: np.ndarray) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=np.float64)
    if gamma.ndim != 2 or gamma.shape[0] != gamma.shape[1]:
        raise InputError("consensus matrix must be square")
    n = gamma.shape[0]
    if n < 2:
        raise InputError("need at least 2 items")
    iu = np.triu_indices(n, k=1)
    return gamma[iu]


def consensus_cdf(gamma: np.ndarray, x) -> np.ndarray | float:
    """Empirical CDF of the off-diagonal consensus entries at x."""
    values = _offdiagonal(gamma)
    x_arr = np.asarray(x, dtype=np.float64)
    out = (values[None, :] <= x_arr.reshape(-1, 1)).mean(axis=1)
    return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)

def cdf_area(gamma: np.ndarray) -> float:
    """Area under the consensus CDF on [0, 1].

    For an empirical CDF of values in [0, 1] the integral collapses to
    1 - mean(values), evaluated here in closed form.
    """
    return float(1.0 - _offdiagonal(gamma).mean())


def pac_score(gamma: np.ndarray, lower: float = 0.1, upper: float = 0.9) -> float:
    """Proportion of ambiguous pairs: CDF(upper) - CDF(lower). Lower is better."""
    lower, upper = float(lower), float(upper)
    if not 0.0 <= lower < upper <= 1.0:
        raise InputError(
            f"ambiguity bounds must satisfy 0 <= lower < upper <= 1,"
            f" got ({lower}, {upper})"
        )
    values = _offdiagonal(gamma)
    return float((values <= upper).mean() - (values <= lower).mean())


def delta_scores(areas: dict[int, float]) -> dict[int, float]:
    """Relative CDF-area gain per cluster count.

    `areas` must cover consecutive cluster counts starting at 2. The score
    at 2 is the area itself; above that it is (a_g - a_{g-1}) / a_{g-1},
    with NaN where the previous area is 0.
    """
    gs = sorted(areas)
    if not gs or gs[0] != 2 or gs != list(range(2, gs[-1] + 1)):
        raise InputError(
            "relative-gain scores need consecutive cluster counts starting at 2"
        )
    out: dict[int, float] = {2: float(areas[2])}
    for g in gs[1:]:
        prev = areas[g - 1]
        out[g] = (areas[g] - prev) / prev if prev != 0.0 else math.nan
    return out


def silhouette_score(dist, assignment) -> float:
    """Mean silhouette width of a partition over a distance matrix.

    Singleton clusters contribute 0; so does any item whose within and
    nearest-other mean distances are both 0.
    """
    D = check_distance_matrix(dist)
    labels = assignment.labels if hasattr(assignment, "labels") else assignment
    labels = check_labels(labels, n=D.shape[0], name="assignment")
    n_clusters = int(labels.max())
    if n_clusters < 2:
        raise InputError("silhouette needs at least 2 clusters")
    n = D.shape[0]
    masks = [labels == g for g in range(1, n_clusters + 1)]
    sizes = np.array([m.sum() for m in masks])
    # sums[i, g-1] = total distance from item i to cluster g
    sums = np.stack([D[:, m].sum(axis=1) for m in masks], axis=1)
    own = labels - 1
    own_size = sizes[own]
    scores = np.zeros(n)
    multi = own_size > 1
    a = np.zeros(n)
    a[multi] = sums[np.arange(n), own][multi] / (own_size[multi] - 1)
    other = sums / sizes[None, :]
    other[np.arange(n), own] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    valid = multi & (denom > 0)
    scores[valid] = (b[valid] - a[valid]) / denom[valid]
    return float(scores.mean())


@dataclass
class ScoreGrid:
    """Scores of every (penalty, cluster count) cell of a calibration run.

    Arrays are shaped (len(penalties), len(cluster_counts)). `delta` is NaN
    when the cluster grid does not start at 2 consecutively; `silhouette`
    is NaN when not computed. `weight_converged` is the fraction of
    subsample weight fits that converged at each penalty (1.0 on the
    unweighted route).
    """

    penalties: tuple[float, ...]
    cluster_counts: tuple[int, ...]
    consensus: np.ndarray
    delta: np.ndarray
    pac: np.ndarray
    silhouette: np.ndarray
    area: np.ndarray
    within_comembers: np.ndarray
    within_cosampled: np.ndarray
    between_comembers: np.ndarray
    between_cosampled: np.ndarray
    weight_converged: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        shape = (len(self.penalties), len(self.cluster_counts))
        for name in (
            "consensus",
            "delta",
            "pac",
            "silhouette",
            "area",
            "within_comembers",
            "within_cosampled",
            "between_comembers",
            "between_cosampled",
        ):
            arr = np.asarray(getattr(self, name))
            if arr.shape != shape:
                raise InputError(f"{name} must have shape {shape}, got {arr.shape}")
            setattr(self, name, arr)
        if self.weight_converged is None:
            self.weight_converged = np.ones(len(self.penalties))
        self.weight_converged = np.asarray(self.weight_converged, dtype=np.float64)
        if self.weight_converged.shape != (len(self.penalties),):
            raise InputError("weight_converged must have one entry per penalty")

    def score(self, kind: str) -> np.ndarray:
        if kind not in SCORE_KINDS:
            raise InputError(f"score kind must be one of {SCORE_KINDS}, got {kind!r}")
        return {"consensus": self.consensus, "delta": self.delta, "pac": self.pac}[
            kind
        ]


@dataclass(frozen=True)
class CalibrationResult:
    kind: str
    penalty: float
    n_clusters: int
    value: float
    penalty_index: int
    cluster_index: int


def calibrate(grid: ScoreGrid, by: str = "consensus") -> CalibrationResult | None:
    """Pick the grid cell favoured by one score.

    The consensus and relative-gain scores are maximized, the ambiguity
    score is minimized. Only cells with at least 2 clusters and a finite
    score compete; exact ties go to the smaller cluster count, then the
    smaller penalty. Returns None when no cell qualifies.
    """
    values = grid.score(by)
    sign = -1.0 if by == "pac" else 1.0
    best: tuple[float, int, int] | None = None
    for gi, g in enumerate(grid.cluster_counts):
        if g < 2:
            continue
        for li in range(len(grid.penalties)):
            value = values[li, gi]
            if not np.isfinite(value):
                continue
            if best is None or sign * value > sign * best[0]:
                best = (float(value), li, gi)
    if best is None:
        return None
    value, li, gi = best
    return CalibrationResult(
        kind=by,
        penalty=float(grid.penalties[li]),
        n_clusters=int(grid.cluster_counts[gi]),
        value=value,
        penalty_index=li,
        cluster_index=gi,
    )
