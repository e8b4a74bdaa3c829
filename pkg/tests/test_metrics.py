import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eusml.metrics import (
    ConfusionMatrix,
    TABLE_HEADER,
    balanced_accuracy,
    confusion_matrix,
    evaluate,
    format_table_row,
    weighted_precision,
    weighted_recall,
)


def cm_of(rows):
    rows = np.asarray(rows)
    return ConfusionMatrix(k=rows.shape[0], counts=rows)


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def test_confusion_perfect_predictions_diagonal():
    cm = confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], 3)
    np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 1]))


def test_confusion_all_predicted_zero():
    cm = confusion_matrix([0, 1, 2], [0, 0, 0], 3)
    assert cm.counts[:, 0].sum() == 3
    assert cm.counts[:, 1:].sum() == 0


def counting_oracle(true, pred, k):
    counts = np.zeros((k, k), dtype=np.int64)
    for t, p in zip(true, pred):
        counts[t][p] += 1
    return counts


def test_confusion_matches_counting_oracle():
    rng = np.random.default_rng(50)
    true = rng.integers(0, 4, 200)
    pred = rng.integers(0, 4, 200)
    cm = confusion_matrix(true, pred, 4)
    np.testing.assert_array_equal(cm.counts, counting_oracle(true, pred, 4))


def test_confusion_validation():
    with pytest.raises(ValueError):
        confusion_matrix([0, 1], [0], 2)
    with pytest.raises(ValueError):
        confusion_matrix([0, 2], [0, 1], 2)
    with pytest.raises(ValueError):
        confusion_matrix([0, -1], [0, 1], 2)
    with pytest.raises(ValueError):
        ConfusionMatrix(k=2, counts=np.array([[1, -2], [0, 3]]))


# ---------------------------------------------------------------------------
# balanced accuracy
# ---------------------------------------------------------------------------

def test_ba_perfect_with_paper_supports():
    cm = cm_of(np.diag([744, 830, 668]))
    assert balanced_accuracy(cm) == 1.0


def test_ba_mean_of_recalls():
    # recalls 1.0, 0.5, 0.0 -> 0.5
    cm = cm_of([[10, 0, 0], [5, 5, 0], [0, 8, 0]])
    assert balanced_accuracy(cm) == pytest.approx(0.5, abs=1e-12)


def test_ba_hand_case():
    cm = cm_of([[8, 2], [4, 6]])
    assert balanced_accuracy(cm) == pytest.approx(0.7, abs=1e-12)


def test_ba_empty_class_error():
    cm = cm_of([[5, 0], [0, 0]])
    with pytest.raises(ValueError, match="no samples"):
        balanced_accuracy(cm)


# ---------------------------------------------------------------------------
# weighted precision / recall
# ---------------------------------------------------------------------------

def test_weighted_precision_cases():
    assert weighted_precision(cm_of(np.diag([3, 4, 5]))) == 1.0
    cm = cm_of([[5, 5], [0, 10]])
    # P = (1.0, 10/15), supports (10, 10)
    assert weighted_precision(cm) == pytest.approx((1.0 + 10 / 15) / 2, abs=1e-12)


def test_weighted_precision_equal_supports_is_plain_mean():
    cm = cm_of([[6, 4], [2, 8]])
    p0 = 6 / 8
    p1 = 8 / 12
    assert weighted_precision(cm) == pytest.approx((p0 + p1) / 2, abs=1e-12)


def test_weighted_precision_all_zero_error():
    with pytest.raises(ValueError):
        weighted_precision(cm_of([[0, 0], [0, 0]]))


def test_weighted_recall_cases():
    assert weighted_recall(cm_of(np.diag([7, 9]))) == 1.0
    cm = cm_of([[8, 2], [4, 6]])
    assert weighted_recall(cm) == pytest.approx(0.7, abs=1e-12)
    assert weighted_recall(cm) == pytest.approx(14 / 20, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 5))
def test_weighted_recall_is_accuracy_identity(seed, k):
    rng = np.random.default_rng(seed)
    counts = rng.integers(1, 50, (k, k))
    cm = ConfusionMatrix(k=k, counts=counts)
    assert weighted_recall(cm) == pytest.approx(np.trace(counts) / counts.sum(), abs=1e-12)


# ---------------------------------------------------------------------------
# algebraic properties
# ---------------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 5))
def test_ba_equals_weighted_recall_on_equal_supports(seed, k):
    rng = np.random.default_rng(seed)
    support = 60
    counts = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        row = rng.multinomial(support, np.ones(k) / k)
        counts[i] = row
    cm = ConfusionMatrix(k=k, counts=counts)
    assert balanced_accuracy(cm) == pytest.approx(weighted_recall(cm), abs=1e-12)


def test_metrics_invariant_under_permutation_and_scaling():
    rng = np.random.default_rng(51)
    counts = rng.integers(1, 40, (4, 4))
    cm = ConfusionMatrix(4, counts)
    perm = rng.permutation(4)
    permuted = ConfusionMatrix(4, counts[np.ix_(perm, perm)])
    scaled = ConfusionMatrix(4, counts * 7)
    for metric in (balanced_accuracy, weighted_precision, weighted_recall):
        assert metric(cm) == pytest.approx(metric(permuted), abs=1e-12)
        assert metric(cm) == pytest.approx(metric(scaled), abs=1e-12)


def brute_force_metrics(true, pred, k):
    """Per-sample recomputation, no confusion matrix involved."""
    recalls, precisions, supports = [], [], []
    for i in range(k):
        tp = sum(1 for t, p in zip(true, pred) if t == i and p == i)
        fn = sum(1 for t, p in zip(true, pred) if t == i and p != i)
        fp = sum(1 for t, p in zip(true, pred) if t != i and p == i)
        n_i = tp + fn
        supports.append(n_i)
        recalls.append(tp / n_i)
        precisions.append(tp / (tp + fp) if tp + fp else 0.0)
    n = sum(supports)
    ba = sum(recalls) / k
    wp = sum(s * p for s, p in zip(supports, precisions)) / n
    wr = sum(s * r for s, r in zip(supports, recalls)) / n
    return ba, wp, wr


def test_metrics_match_brute_force_from_raw_labels():
    rng = np.random.default_rng(52)
    for _ in range(20):
        k = int(rng.integers(2, 5))
        true = rng.integers(0, k, 150)
        true[:k] = np.arange(k)  # every class present
        pred = rng.integers(0, k, 150)
        cm = confusion_matrix(true, pred, k)
        ba, wp, wr = brute_force_metrics(true, pred, k)
        assert balanced_accuracy(cm) == pytest.approx(ba, abs=1e-12)
        assert weighted_precision(cm) == pytest.approx(wp, abs=1e-12)
        assert weighted_recall(cm) == pytest.approx(wr, abs=1e-12)


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def test_evaluate_report_fields_and_flags():
    cm = cm_of([[5, 0], [10, 0]])  # nothing ever predicted as class 1
    report = evaluate(cm)
    assert report.undefined_precision_classes == (1,)
    assert report.per_class_precision[1] == 0.0
    assert report.supports == (5, 10)
    doc = report.to_json()
    assert '"balanced_accuracy"' in doc


def test_table_row_format():
    cm = cm_of([[8, 2], [4, 6]])
    # BA 0.7; precision (10*(8/12) + 10*(6/8))/20 = 0.70833 -> 70.8
    row = format_table_row("none", evaluate(cm))
    assert row.split() == ["none", "70.0", "70.8", "70.0"]
    assert TABLE_HEADER.split() == ["method", "BA", "prec", "rec"]
