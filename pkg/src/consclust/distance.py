"""Pairwise distances, per-attribute decompositions, and attribute weight fits.

Two weighting routes are supported on top of a shared per-attribute
decomposition d_ijm (distance between items i and j on attribute m):

* a single non-negative weight vector over attributes, fitted by alternating
  maximization of sum_m w_m sum_ij d_ijm U_ij under ||w||_2 <= 1,
  ||w||_1 <= lam, w >= 0, ||U||_F <= 1;
* per-item row weights (one simplex row per item), fitted as the fixed point
  of a nearest-neighbour dispersion / entropy-penalized assignment, combined
  across items by d_ij = sum_m max(W_im, W_jm) d_ijm.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import as_float_matrix
from .exceptions import InputError, NumericalError

METRICS = ("squared", "absolute")

# Attribute chunking keeps n*n*chunk tensors near this many elements.
_CHUNK_CELLS = 1 << 23


@dataclass(frozen=True)
class DataMatrix:
    """Items-by-attributes matrix with row and column identifiers."""

    values: np.ndarray
    item_ids: tuple[str, ...]
    attribute_ids: tuple[str, ...]

    def __post_init__(self):
        values = as_float_matrix(self.values, "data matrix")
        object.__setattr__(self, "values", values)
        n, p = values.shape
        if len(self.item_ids) != n:
            raise InputError(f"expected {n} item ids, got {len(self.item_ids)}")
        if len(self.attribute_ids) != p:
            raise InputError(
                f"expected {p} attribute ids, got {len(self.attribute_ids)}"
            )
        if len(set(self.item_ids)) != n:
            raise InputError("item ids must be unique")
        if len(set(self.attribute_ids)) != p:
            raise InputError("attribute ids must be unique")

    @classmethod
    def from_values(cls, values, item_ids=None, attribute_ids=None) -> "DataMatrix":
        values = as_float_matrix(values, "data matrix")
        n, p = values.shape
        if item_ids is None:
            item_ids = tuple(f"item{i + 1}" for i in range(n))
        if attribute_ids is None:
            attribute_ids = tuple(f"attr{j + 1}" for j in range(p))
        return cls(values, tuple(item_ids), tuple(attribute_ids))

    @property
    def n_items(self) -> int:
        return self.values.shape[0]

    @property
    def n_attributes(self) -> int:
        return self.values.shape[1]


@dataclass
class AttributeWeights:
    """Fitted attribute weights.

    ``values`` is a length-p vector for the sparse route or an n-by-p row
    weight matrix for the per-item route.
    """

    values: np.ndarray
    kind: str
    n_iter: int
    converged: bool
    objective: float | None = None
    objectives: tuple[float, ...] = field(default_factory=tuple)


def _check_metric(metric: str) -> str:
    if metric not in METRICS:
        raise InputError(f"metric must be one of {METRICS}, got {metric!r}")
    return metric


def _finalize_distance(dist: np.ndarray) -> np.ndarray:
    # Guard against BLAS cancellation noise: distances are non-negative,
    # symmetric, and zero on the diagonal by definition.
    np.maximum(dist, 0.0, out=dist)
    dist = 0.5 * (dist + dist.T)
    np.fill_diagonal(dist, 0.0)
    return dist


class PerAttributeDistance:
    """Per-attribute distances d_ijm over one data matrix, evaluated lazily.

    Nothing of size n*n*p is kept; consumers stream attribute chunks.
    """

    def __init__(self, values: np.ndarray, metric: str = "squared"):
        self.values = as_float_matrix(values, "values")
        self.metric = _check_metric(metric)
        self.n_items, self.n_attributes = self.values.shape

    def _chunk_size(self) -> int:
        n = self.n_items
        return max(1, _CHUNK_CELLS // max(1, n * n))

    def iter_chunks(self):
        """Yield (attribute slice, d_ijm tensor of shape (n, n, width))."""
        X = self.values
        step = self._chunk_size()
        for start in range(0, self.n_attributes, step):
            sl = slice(start, min(start + step, self.n_attributes))
            diff = X[:, None, sl] - X[None, :, sl]
            if self.metric == "squared":
                chunk = diff * diff
            else:
                chunk = np.abs(diff)
            yield sl, chunk

    def total(self) -> np.ndarray:
        """Unweighted distance matrix: sum_m d_ijm."""
        if self.metric == "squared":
            dist = cdist(self.values, self.values, "sqeuclidean")
        else:
            dist = cdist(self.values, self.values, "cityblock")
        np.fill_diagonal(dist, 0.0)
        return dist

    def weighted(self, weights: np.ndarray) -> np.ndarray:
        """Distance under one attribute weight vector: sum_m w_m d_ijm."""
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.n_attributes,):
            raise InputError(
                f"weights must have shape ({self.n_attributes},), got {w.shape}"
            )
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InputError("weights must be finite and non-negative")
        if self.metric == "squared":
            # sum_m w_m (x_im - x_jm)^2 is a plain squared distance on X*sqrt(w)
            scaled = self.values * np.sqrt(w)
            dist = cdist(scaled, scaled, "sqeuclidean")
        else:
            scaled = self.values * w
            dist = cdist(scaled, scaled, "cityblock")
        np.fill_diagonal(dist, 0.0)
        return dist

    def attribute_scores(self, direction: np.ndarray) -> np.ndarray:
        """Per-attribute alignment a_m = sum_ij d_ijm * direction_ij (>= 0
        whenever direction is non-negative)."""
        U = np.asarray(direction, dtype=np.float64)
        n = self.n_items
        if U.shape != (n, n):
            raise InputError(f"direction must have shape ({n}, {n}), got {U.shape}")
        X = self.values
        if self.metric == "squared":
            rc = U.sum(axis=1) + U.sum(axis=0)
            quad = np.einsum("im,im->m", X, U @ X)
            scores = (X * X).T @ rc - 2.0 * quad
        else:
            scores = np.empty(self.n_attributes)
            for sl, chunk in self.iter_chunks():
                scores[sl] = np.einsum("ijc,ij->c", chunk, U)
        return np.maximum(scores, 0.0)

    def row_weighted(self, row_weights: np.ndarray) -> np.ndarray:
        """Asymmetric per-item view d_ij(W_i.) = sum_m W_im d_ijm."""
        W = self._check_row_weights(row_weights)
        X = self.values
        if self.metric == "squared":
            own = np.einsum("im,im->i", W, X * X)
            dist = own[:, None] + W @ (X * X).T - 2.0 * ((W * X) @ X.T)
            np.maximum(dist, 0.0, out=dist)
        else:
            dist = np.zeros((self.n_items, self.n_items))
            for sl, chunk in self.iter_chunks():
                dist += np.einsum("ijc,ic->ij", chunk, W[:, sl])
        np.fill_diagonal(dist, 0.0)
        return dist

    def max_weighted(self, row_weights: np.ndarray) -> np.ndarray:
        """Symmetric combined distance d_ij = sum_m max(W_im, W_jm) d_ijm."""
        W = self._check_row_weights(row_weights)
        dist = np.zeros((self.n_items, self.n_items))
        for sl, chunk in self.iter_chunks():
            Wc = W[:, sl]
            pairmax = np.maximum(Wc[:, None, :], Wc[None, :, :])
            dist += np.einsum("ijc,ijc->ij", chunk, pairmax)
        np.fill_diagonal(dist, 0.0)
        return dist

    def neighbour_attribute_means(self, neighbour_idx: np.ndarray) -> np.ndarray:
        """s_im = mean over j in neighbour_idx[i] of d_ijm, shape (n, p)."""
        X = self.values
        n, p = X.shape
        kn = neighbour_idx.shape[1]
        out = np.empty((n, p))
        step = max(1, _CHUNK_CELLS // max(1, kn * p))
        for start in range(0, n, step):
            rows = slice(start, min(start + step, n))
            diff = X[rows, None, :] - X[neighbour_idx[rows]]
            if self.metric == "squared":
                np.mean(diff * diff, axis=1, out=out[rows])
            else:
                np.mean(np.abs(diff), axis=1, out=out[rows])
        return out

    def _check_row_weights(self, row_weights: np.ndarray) -> np.ndarray:
        W = np.asarray(row_weights, dtype=np.float64)
        if W.shape != (self.n_items, self.n_attributes):
            raise InputError(
                f"row weights must have shape ({self.n_items}, {self.n_attributes}),"
                f" got {W.shape}"
            )
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise InputError("row weights must be finite and non-negative")
        return W


def pairwise_distance(values, metric: str = "squared") -> np.ndarray:
    """Unweighted pairwise distance matrix (summed over attributes)."""
    return PerAttributeDistance(values, metric).total()


def sparse_weighted_distance(pad: PerAttributeDistance, weights) -> np.ndarray:
    """Distance matrix under a fitted sparse attribute weight vector."""
    values = weights.values if isinstance(weights, AttributeWeights) else weights
    return pad.weighted(values)


def cosa_distance(pad: PerAttributeDistance, row_weights) -> np.ndarray:
    """Distance matrix under fitted per-item row weights (max combination)."""
    values = (
        row_weights.values
        if isinstance(row_weights, AttributeWeights)
        else row_weights
    )
    return pad.max_weighted(values)


def _project_sparse(scores: np.ndarray, bound: float) -> np.ndarray:
    """Maximize w.scores over ||w||_2 <= 1, ||w||_1 <= bound, w >= 0.

    Soft-threshold then L2-normalize; the threshold is found by bisection on
    [0, max(scores)] so the L1 norm lands on the bound when it is active.
    """
    norm2 = float(np.linalg.norm(scores))
    p = scores.size
    if norm2 == 0.0:
        # Zero scores make every weight vector optimal; return the uniform
        # vector scaled to satisfy whichever norm constraint binds first.
        return np.full(p, min(1.0 / np.sqrt(p), bound / p))
    base = scores / norm2
    if base.sum() <= bound:  # scores >= 0, so the L1 norm is the plain sum
        return base
    lo, hi = 0.0, float(scores.max())
    feasible = None
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        shrunk = np.maximum(scores - mid, 0.0)
        nrm = float(np.linalg.norm(shrunk))
        if nrm == 0.0:
            hi = mid
            continue
        candidate = shrunk / nrm
        if candidate.sum() > bound:
            lo = mid
        else:
            hi = mid
            feasible = candidate
    if feasible is None:
        # Boundary hugs max(scores); fall back to the single best attribute.
        feasible = np.zeros(p)
        feasible[int(np.argmax(scores))] = 1.0
    return feasible


def fit_sparse_weights(
    pad: PerAttributeDistance,
    bound: float,
    max_iter: int = 15,
    tol: float = 1e-4,
) -> AttributeWeights:
    """Fit one attribute weight vector by alternating maximization.

    Parameters
    ----------
    pad : PerAttributeDistance
        Per-attribute distances of the items being weighted.
    bound : float
        L1 bound on the weight vector; must exceed 1. At or above sqrt(p)
        the L1 constraint is inactive.
    max_iter : int
        Cap on full (direction, weight) update rounds.
    tol : float
        Relative L1 change in the weights that counts as converged.

    Returns
    -------
    AttributeWeights
        kind="sparse", with the objective value trajectory recorded.
    """
    bound = float(bound)
    if not bound > 1.0:
        raise InputError(f"the L1 bound must exceed 1, got {bound}")
    p = pad.n_attributes
    w = np.full(p, 1.0 / np.sqrt(p))
    objectives: list[float] = []
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dist = pad.weighted(w)
        norm = float(np.linalg.norm(dist))
        if norm == 0.0:
            # All items identical under the current weights: nothing to fit.
            w = np.full(p, min(1.0 / np.sqrt(p), bound / p))
            objectives.append(0.0)
            converged = True
            break
        direction = dist / norm
        scores = pad.attribute_scores(direction)
        w_new = _project_sparse(scores, bound)
        objectives.append(float(w_new @ scores))
        change = float(np.abs(w_new - w).sum()) / max(float(np.abs(w).sum()), 1e-300)
        w = w_new
        if change < tol:
            converged = True
            break
    if np.any(w < 0) or w.sum() > bound + 1e-9 or np.linalg.norm(w) > 1.0 + 1e-9:
        raise NumericalError("sparse weight projection left the feasible set")
    return AttributeWeights(
        values=w,
        kind="sparse",
        n_iter=n_iter,
        converged=converged,
        objective=objectives[-1] if objectives else 0.0,
        objectives=tuple(objectives),
    )


def neighbourhood_size(n_items: int) -> int:
    """Neighbourhood used by the row-weight fit: floor(sqrt(n)), at least 1."""
    return max(1, int(np.floor(np.sqrt(n_items))))


def _nearest_neighbours(dist: np.ndarray, size: int) -> np.ndarray:
    """Indices of each row's `size` nearest other items, ties to lower index."""
    work = dist.copy()
    np.fill_diagonal(work, np.inf)
    # Stable sort keeps the lower index first among exactly tied distances.
    order = np.argsort(work, axis=1, kind="stable")
    return order[:, :size]


def fit_cosa_weights(
    pad: PerAttributeDistance,
    scale: float,
    max_iter: int = 20,
    tol: float = 1e-4,
) -> AttributeWeights:
    """Fit per-item row weights as an entropy-softmax fixed point.

    Each round: per-item weighted distances -> floor(sqrt(n)) nearest
    neighbours per item -> per-attribute neighbourhood dispersion s_im ->
    row update W_im proportional to exp(-s_im / scale), which is the exact
    minimizer of sum_m W_im s_im + scale * sum_m W_im log W_im on the simplex.

    Parameters
    ----------
    pad : PerAttributeDistance
        Per-attribute distances of the items being weighted.
    scale : float
        Positive softness scale; large values flatten the rows toward 1/p.
    max_iter, tol : int, float
        Stop when the largest entrywise change is at most `tol`, or after
        `max_iter` rounds.

    Returns
    -------
    AttributeWeights
        kind="cosa" with an (n, p) simplex-row matrix.
    """
    scale = float(scale)
    if not scale > 0.0:
        raise InputError(f"scale must be positive, got {scale}")
    n, p = pad.n_items, pad.n_attributes
    size = neighbourhood_size(n)
    W = np.full((n, p), 1.0 / p)
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        dist = pad.row_weighted(W)
        idx = _nearest_neighbours(dist, size)
        spread = pad.neighbour_attribute_means(idx)
        shifted = -(spread - spread.min(axis=1, keepdims=True)) / scale
        # Exponent floor keeps every weight strictly positive.
        np.clip(shifted, -700.0, 0.0, out=shifted)
        expo = np.exp(shifted)
        W_new = expo / expo.sum(axis=1, keepdims=True)
        _check_simplex_rows(W_new)
        change = float(np.abs(W_new - W).max())
        W = W_new
        if change <= tol:
            converged = True
            break
    return AttributeWeights(values=W, kind="cosa", n_iter=n_iter, converged=converged)


def _check_simplex_rows(W: np.ndarray) -> None:
    sums = W.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-12):
        raise NumericalError("row weights drifted off the simplex")
    if np.any(W <= 0.0):
        raise NumericalError("row weights must stay strictly positive")


def standardize_columns(values: np.ndarray) -> np.ndarray:
    """Z-score each column (ddof=1); constant columns become all zero."""
    arr = as_float_matrix(values, "values")
    mean = arr.mean(axis=0)
    sd = arr.std(axis=0, ddof=1)
    out = arr - mean
    nonzero = sd > 0
    out[:, nonzero] /= sd[nonzero]
    out[:, ~nonzero] = 0.0
    return out
