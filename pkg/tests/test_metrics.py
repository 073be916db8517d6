import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from consclust import (
    InputError,
    adjusted_rand_index,
    jaccard_index,
    pair_confusion,
    rand_index,
)
from consclust.metrics import (
    median_weight_profile,
    selection_f1,
    selection_proportions,
    top_attributes,
    weighting_f1,
)
from oracles import pair_counts_oracle


def random_labels(rng, n, max_g):
    g = int(rng.integers(1, max_g + 1))
    labels = rng.integers(1, g + 1, size=n)
    # Relabel by first occurrence so there are no gaps.
    seen: dict[int, int] = {}
    return np.asarray([seen.setdefault(int(v), len(seen) + 1) for v in labels])


# ------------------------------------------------------------ pair confusion


def test_pair_confusion_matches_double_loop():
    rng = np.random.default_rng(0)
    for _ in range(30):
        n = int(rng.integers(3, 16))
        t = random_labels(rng, n, 4)
        e = random_labels(rng, n, 4)
        pc = pair_confusion(t, e)
        tp, fp, fn, tn = pair_counts_oracle(t, e)
        assert (
            pc.together_both,
            pc.together_estimate_only,
            pc.together_truth_only,
            pc.apart_both,
        ) == (tp, fp, fn, tn)
        assert pc.n_pairs == n * (n - 1) // 2


def test_pair_confusion_hand_case():
    t = np.array([1, 1, 2, 2])
    e = np.array([1, 2, 1, 2])
    pc = pair_confusion(t, e)
    assert pc.together_both == 0
    assert pc.together_truth_only == 2
    assert pc.together_estimate_only == 2
    assert pc.apart_both == 2


# ----------------------------------------------------------------- the scores


def test_ari_matches_contingency_oracle():
    rng = np.random.default_rng(1)
    for _ in range(150):
        n = int(rng.integers(3, 25))
        t = random_labels(rng, n, 5)
        e = random_labels(rng, n, 5)
        ours = adjusted_rand_index(t, e)
        theirs = adjusted_rand_score(t, e)
        assert ours == pytest.approx(theirs, abs=1e-12)


def test_ari_perfect_and_label_permutation_invariant():
    t = np.array([1, 1, 2, 2, 3])
    assert adjusted_rand_index(t, t) == 1.0
    permuted = np.array([2, 2, 3, 3, 1])
    assert adjusted_rand_index(t, permuted) == 1.0


def test_ari_degenerate_identical_trivial_partitions():
    ones = np.ones(5, dtype=int)
    assert adjusted_rand_index(ones, ones) == 1.0
    singles = np.arange(1, 6)
    assert adjusted_rand_index(singles, singles) == 1.0
    # Sanity: degenerate-vs-informative disagreement is not rewarded.
    assert adjusted_rand_index(ones, np.array([1, 1, 1, 2, 2])) == 0.0


def test_rand_and_jaccard_hand_values():
    t = np.array([1, 1, 2, 2])
    e = np.array([1, 2, 1, 2])
    assert rand_index(t, e) == pytest.approx(2 / 6)
    assert jaccard_index(t, e) == 0.0
    assert rand_index(t, t) == 1.0
    assert jaccard_index(t, t) == 1.0


def test_jaccard_when_no_pairs_together_anywhere():
    singles = np.arange(1, 7)
    assert jaccard_index(singles, singles) == 1.0


def test_scores_validate_labels():
    with pytest.raises(InputError):
        adjusted_rand_index(np.array([1, 3]), np.array([1, 2]))  # skipped 2
    with pytest.raises(InputError):
        adjusted_rand_index(np.array([1, 2]), np.array([1, 2, 2]))  # lengths


# ----------------------------------------------------------- attribute scores


def test_top_attributes_order_and_ties():
    w = np.array([0.2, 0.9, 0.2, 0.9, 0.0])
    np.testing.assert_array_equal(top_attributes(w, 2), [1, 3])
    # Tie between indices 0 and 2 at weight 0.2: lower index enters first.
    np.testing.assert_array_equal(top_attributes(w, 3), [0, 1, 3])
    with pytest.raises(InputError):
        top_attributes(w, 0)
    with pytest.raises(InputError):
        top_attributes(w, 6)


def test_selection_f1_hand_values():
    assert selection_f1({0, 1, 2, 3}, {0, 1, 2, 3}) == 1.0
    assert selection_f1({0, 1}, {2, 3}) == 0.0
    # precision 1/2, recall 1/4 -> F1 = 2 * (1/8) / (3/4) = 1/3
    assert selection_f1({0, 1, 2, 3}, {0, 9}) == pytest.approx(1 / 3)
    with pytest.raises(InputError):
        selection_f1(set(), {1})


def test_weighting_f1_defaults_to_true_set_size():
    true_attrs = [0, 1, 2]
    w = np.array([0.5, 0.4, 0.0, 0.3, 0.2])
    # Top 3 weights sit at indices 0, 1, 3: hits = 2 of q = 3.
    assert weighting_f1(true_attrs, w) == pytest.approx(2 / 3)
    assert weighting_f1(true_attrs, w, top_q=2) == pytest.approx(
        selection_f1(true_attrs, [0, 1])
    )


def test_median_profile_and_selection_proportions():
    rows = np.array(
        [
            [0.0, 0.5, 1.0],
            [0.2, 0.5, 0.0],
            [0.0, 0.7, 0.4],
        ]
    )
    np.testing.assert_allclose(median_weight_profile(rows), [0.0, 0.5, 0.4])
    np.testing.assert_allclose(selection_proportions(rows), [1 / 3, 1.0, 2 / 3])
    with pytest.raises(InputError):
        median_weight_profile(np.ones(3))
