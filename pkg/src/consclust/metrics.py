"""Partition agreement metrics and attribute-recovery scores.

Agreement metrics are computed from the pair confusion over all n(n-1)/2
distinct item pairs, in exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from ._validation import check_labels
from .exceptions import InputError


@dataclass(frozen=True)
class PairConfusion:
    """Pair counts: together_both, estimate-only, truth-only, apart_both."""

    together_both: int
    together_estimate_only: int
    together_truth_only: int
    apart_both: int

    @property
    def n_pairs(self) -> int:
        return (
            self.together_both
            + self.together_estimate_only
            + self.together_truth_only
            + self.apart_both
        )


def pair_confusion(truth, estimate) -> PairConfusion:
    """Classify every distinct item pair by co-membership in both partitions."""
    t = check_labels(truth, name="truth")
    e = check_labels(estimate, n=t.size, name="estimate")
    n = t.size
    table: dict[tuple[int, int], int] = {}
    for pair in zip(t.tolist(), e.tolist()):
        table[pair] = table.get(pair, 0) + 1
    together_both = sum(comb(c, 2) for c in table.values())
    truth_sizes: dict[int, int] = {}
    est_sizes: dict[int, int] = {}
    for value in t.tolist():
        truth_sizes[value] = truth_sizes.get(value, 0) + 1
    for value in e.tolist():
        est_sizes[value] = est_sizes.get(value, 0) + 1
    together_truth = sum(comb(c, 2) for c in truth_sizes.values())
    together_est = sum(comb(c, 2) for c in est_sizes.values())
    total = comb(n, 2)
    together_estimate_only = together_est - together_both
    together_truth_only = together_truth - together_both
    apart_both = total - together_both - together_estimate_only - together_truth_only
    return PairConfusion(
        together_both=together_both,
        together_estimate_only=together_estimate_only,
        together_truth_only=together_truth_only,
        apart_both=apart_both,
    )


def adjusted_rand_index(truth, estimate) -> float:
    """Chance-corrected pair agreement.

    With TP pairs together in both, TN apart in both, FP together only in
    the estimate and FN together only in the truth:

        2 (TP*TN - FP*FN) / ((TP+FP)(TN+FP) + (TP+FN)(TN+FN))

    Identical trivial partitions make the denominator 0; that is perfect
    agreement, scored 1.
    """
    pc = pair_confusion(truth, estimate)
    tp, tn = pc.together_both, pc.apart_both
    fp, fn = pc.together_estimate_only, pc.together_truth_only
    denom = (tp + fp) * (tn + fp) + (tp + fn) * (tn + fn)
    if denom == 0:
        return 1.0
    return 2.0 * (tp * tn - fp * fn) / denom


def rand_index(truth, estimate) -> float:
    """Plain pair agreement rate."""
    pc = pair_confusion(truth, estimate)
    return (pc.together_both + pc.apart_both) / pc.n_pairs


def jaccard_index(truth, estimate) -> float:
    """Agreement on together-pairs only; 1 when neither partition has any."""
    pc = pair_confusion(truth, estimate)
    denom = pc.together_both + pc.together_estimate_only + pc.together_truth_only
    if denom == 0:
        return 1.0
    return pc.together_both / denom


def top_attributes(weights, top_q: int) -> np.ndarray:
    """Indices of the top_q largest weights, ties to the lower index."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1:
        raise InputError("weights must be a 1-d vector")
    if not 1 <= top_q <= w.size:
        raise InputError(f"top_q must lie in 1..{w.size}, got {top_q}")
    order = np.argsort(-w, kind="stable")  # stable: equal weights keep index order
    return np.sort(order[:top_q])


def selection_f1(true_attributes, selected_attributes) -> float:
    """F1 of a selected attribute set against the true contributing set."""
    true_set = set(int(i) for i in true_attributes)
    sel_set = set(int(i) for i in selected_attributes)
    if not true_set or not sel_set:
        raise InputError("both attribute sets must be non-empty")
    hits = len(true_set & sel_set)
    precision = hits / len(sel_set)
    recall = hits / len(true_set)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def weighting_f1(true_attributes, weights, top_q: int | None = None) -> float:
    """F1 of the top-weighted attributes against the true contributing set.

    top_q defaults to the size of the true set, making precision and
    recall (and so F1) coincide at |intersection| / q.
    """
    true_list = [int(i) for i in true_attributes]
    if not true_list:
        raise InputError("the true attribute set must be non-empty")
    if top_q is None:
        top_q = len(true_list)
    return selection_f1(true_list, top_attributes(weights, top_q))


def median_weight_profile(weight_rows) -> np.ndarray:
    """Per-attribute median over per-subsample weight summaries."""
    arr = np.asarray(weight_rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InputError("need a (n_subsamples, n_attributes) weight array")
    return np.median(arr, axis=0)


def selection_proportions(weight_rows) -> np.ndarray:
    """Per-attribute fraction of subsamples with a strictly positive weight."""
    arr = np.asarray(weight_rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise InputError("need a (n_subsamples, n_attributes) weight array")
    return (arr > 0).mean(axis=0)
