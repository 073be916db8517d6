"""Deterministic hierarchical agglomeration and medoid partitioning.

Both algorithms consume a precomputed distance matrix and resolve every tie
by explicit index rules, so a given input always yields the same partition
regardless of platform or thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_distance_matrix, check_labels, check_positive_int
from .exceptions import InputError, NumericalError

LINKAGES = ("single", "complete", "average")


@dataclass(frozen=True)
class Merge:
    """One agglomeration step joining the clusters identified by two node ids.

    Node ids follow the usual convention: items are 0..n-1 and the cluster
    created by merge k gets id n+k.
    """

    left: int
    right: int
    height: float


@dataclass(frozen=True)
class Dendrogram:
    n_items: int
    linkage: str
    merges: tuple[Merge, ...]

    def __post_init__(self):
        n = self.n_items
        if len(self.merges) != max(0, n - 1):
            raise InputError(
                f"a dendrogram over {n} items needs {n - 1} merges,"
                f" got {len(self.merges)}"
            )
        seen: set[int] = set()
        prev = -np.inf
        for k, merge in enumerate(self.merges):
            if not 0 <= merge.left < merge.right < n + k:
                raise InputError(f"merge {k} references invalid node ids")
            if merge.left in seen or merge.right in seen:
                raise InputError(f"merge {k} reuses an already merged node")
            seen.update((merge.left, merge.right))
            if merge.height < prev - 1e-9 * max(1.0, abs(prev)):
                raise NumericalError(
                    f"merge heights decreased at step {k}:"
                    f" {merge.height} after {prev}"
                )
            prev = merge.height


@dataclass(frozen=True)
class ClusterAssignment:
    """Labels 1..n_clusters over items in input order; every label occurs."""

    labels: np.ndarray
    n_clusters: int
    medoids: tuple[int, ...] | None = None

    def __post_init__(self):
        labels = check_labels(self.labels, name="labels")
        object.__setattr__(self, "labels", labels)
        if int(labels.max()) != self.n_clusters:
            raise InputError(
                f"labels use {int(labels.max())} clusters, expected {self.n_clusters}"
            )


def relabel_by_first_occurrence(raw: np.ndarray) -> np.ndarray:
    """Map arbitrary group codes to 1..G in order of first appearance."""
    raw = np.asarray(raw)
    out = np.empty(raw.size, dtype=np.int64)
    mapping: dict[int, int] = {}
    for i, value in enumerate(raw.tolist()):
        code = mapping.setdefault(value, len(mapping) + 1)
        out[i] = code
    return out


def hierarchical(dist, linkage: str = "complete") -> Dendrogram:
    """Agglomerate a distance matrix bottom-up.

    Parameters
    ----------
    dist : (n, n) array
        Symmetric non-negative distances with a zero diagonal.
    linkage : {"single", "complete", "average"}
        Cluster distance update rule.

    Returns
    -------
    Dendrogram
        n-1 merges in non-decreasing height order. When several active pairs
        attain the minimal distance, the pair whose (smaller id, larger id)
        tuple is lexicographically smallest merges first.
    """
    if linkage not in LINKAGES:
        raise InputError(f"linkage must be one of {LINKAGES}, got {linkage!r}")
    D = check_distance_matrix(dist)
    n = D.shape[0]
    work = D.copy()
    np.fill_diagonal(work, np.inf)
    ids = np.arange(n)
    sizes = np.ones(n, dtype=np.int64)
    merges: list[Merge] = []
    for step in range(n - 1):
        height = float(work.min())
        rows, cols = np.nonzero(work == height)
        best_pair = None
        best_slots = None
        for si, sj in zip(rows.tolist(), cols.tolist()):
            if si >= sj:
                continue
            ia, ib = int(ids[si]), int(ids[sj])
            pair = (ia, ib) if ia < ib else (ib, ia)
            if best_pair is None or pair < best_pair:
                best_pair = pair
                best_slots = (si, sj)
        si, sj = best_slots
        if linkage == "single":
            row = np.minimum(work[si], work[sj])
        elif linkage == "complete":
            row = np.maximum(work[si], work[sj])
        else:
            row = (sizes[si] * work[si] + sizes[sj] * work[sj]) / (
                sizes[si] + sizes[sj]
            )
        work[si] = row
        work[:, si] = row
        work[si, si] = np.inf
        work[sj] = np.inf
        work[:, sj] = np.inf
        sizes[si] += sizes[sj]
        ids[si] = n + step
        merges.append(Merge(best_pair[0], best_pair[1], height))
    return Dendrogram(n_items=n, linkage=linkage, merges=tuple(merges))


def cut(dendrogram: Dendrogram, n_clusters: int) -> ClusterAssignment:
    """Partition into n_clusters by dropping the n_clusters-1 highest merges.

    Labels are 1..n_clusters in order of first item occurrence.
    """
    n = dendrogram.n_items
    n_clusters = check_positive_int(n_clusters, "n_clusters")
    if n_clusters > n:
        raise InputError(f"cannot cut {n} items into {n_clusters} clusters")
    parent = list(range(2 * n - n_clusters))

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for k, merge in enumerate(dendrogram.merges[: n - n_clusters]):
        parent[find(merge.left)] = n + k
        parent[find(merge.right)] = n + k
    roots = np.fromiter((find(i) for i in range(n)), dtype=np.int64, count=n)
    labels = relabel_by_first_occurrence(roots)
    return ClusterAssignment(labels=labels, n_clusters=n_clusters)


# Greedy builds are started from each of this many anchor items. A single
# build+swap descent can stall in a swap-local optimum on small instances;
# a handful of deterministic restarts removes those in practice while
# keeping the cost a small constant factor on large inputs.
_PAM_ANCHORS = 10


def _pam_build(D: np.ndarray, n_clusters: int, anchor: int) -> list[int]:
    # Greedy: fix the anchor, then repeatedly add the candidate with the
    # largest cost reduction. np.argmax breaks ties toward the lower index.
    medoids = [anchor]
    nearest = D[:, anchor].copy()
    while len(medoids) < n_clusters:
        gains = np.maximum(nearest[:, None] - D, 0.0).sum(axis=0)
        gains[medoids] = -np.inf
        best = int(np.argmax(gains))
        medoids.append(best)
        np.minimum(nearest, D[:, best], out=nearest)
    return medoids


def _pam_swap(D: np.ndarray, medoids: list[int]) -> tuple[list[int], float]:
    # Steepest descent over single medoid/non-medoid exchanges.
    n = D.shape[0]
    member = set(medoids)
    cost = float(np.min(D[:, sorted(member)], axis=1).sum())
    while True:
        med_sorted = sorted(member)
        cols = D[:, med_sorted]
        order = np.argsort(cols, axis=1, kind="stable")
        d1 = cols[np.arange(n), order[:, 0]]
        if len(med_sorted) > 1:
            d2 = cols[np.arange(n), order[:, 1]]
        else:
            d2 = np.full(n, np.inf)
        nearest_pos = order[:, 0]
        best_delta = 0.0
        best_swap = None
        for pos, med in enumerate(med_sorted):
            # Cost of every candidate set (medoids - med + h), all h at once.
            base = np.where(nearest_pos == pos, d2, d1)
            new_costs = np.minimum(base[:, None], D).sum(axis=0)
            new_costs[med_sorted] = np.inf
            h = int(np.argmin(new_costs))
            delta = float(new_costs[h]) - cost
            if delta < best_delta - 1e-12:
                best_delta = delta
                best_swap = (med, h, float(new_costs[h]))
        if best_swap is None:
            break
        med_out, med_in, cost = best_swap
        member.remove(med_out)
        member.add(med_in)
    return sorted(member), cost


def pam(dist, n_clusters: int, seed: int = 0) -> ClusterAssignment:
    """Partition around medoids: anchored greedy builds plus best-swap.

    A greedy build is run from each anchor (the items with the smallest
    total distance, all items when n <= 10; the first anchor reproduces
    the classic single build), each followed by steepest-descent swaps.
    The best swap-terminal medoid set wins, so the result never admits an
    improving single swap and its cost never exceeds any build cost.

    Parameters
    ----------
    dist : (n, n) array
        Symmetric non-negative distances with a zero diagonal.
    n_clusters : int
        Number of medoids to select, between 1 and n.
    seed : int
        Accepted for interface stability; the algorithm is fully
        deterministic and never consumes randomness.

    Returns
    -------
    ClusterAssignment
        Labels 1..n_clusters by first occurrence; `medoids` holds the
        selected item indices in ascending order.
    """
    del seed
    D = check_distance_matrix(dist)
    n = D.shape[0]
    n_clusters = check_positive_int(n_clusters, "n_clusters")
    if n_clusters > n:
        raise InputError(f"cannot pick {n_clusters} medoids from {n} items")

    # Stable argsort keeps the anchor order platform-independent under ties.
    anchors = np.argsort(D.sum(axis=1), kind="stable")[: min(n, _PAM_ANCHORS)]
    best_cost = np.inf
    best_medoids: list[int] | None = None
    for anchor in anchors:
        medoids, cost = _pam_swap(D, _pam_build(D, n_clusters, int(anchor)))
        if cost < best_cost - 1e-12:
            best_cost = cost
            best_medoids = medoids

    assign = np.argmin(D[:, best_medoids], axis=1)
    labels = relabel_by_first_occurrence(assign)
    return ClusterAssignment(
        labels=labels, n_clusters=n_clusters, medoids=tuple(best_medoids)
    )
