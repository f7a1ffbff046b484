"""Containers, score conversions, and one-vs-rest plumbing."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imaxcal import (
    BinaryCalibrationSet,
    ClassGrouping,
    DataError,
    PROBABILITIES,
    PredictionMatrix,
    RAW_LOGITS,
)
from imaxcal.data import (
    group_all,
    group_by_prior,
    group_singletons,
    logit_of_prob,
    merge_sets,
    ovr_decompose,
    prob_of_logit,
    softmax,
)


# --- score conversions -------------------------------------------------

def test_softmax_known_pair():
    row = softmax(np.array([[1.0, 0.0]]))[0]
    assert row[0] == pytest.approx(0.7310585786300049, abs=1e-15)
    assert row[1] == pytest.approx(0.2689414213699951, abs=1e-15)


def test_softmax_constant_row_is_uniform():
    out = softmax(np.full((3, 4), 7.3))
    np.testing.assert_allclose(out, 0.25, atol=1e-15)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    out = softmax(rng.normal(scale=10.0, size=(100, 7)))
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert out.min() > 0.0


def test_softmax_rejects_nonfinite():
    with pytest.raises(DataError):
        softmax(np.array([[0.0, np.nan]]))
    with pytest.raises(DataError):
        softmax(np.array([[0.0, np.inf]]))


@given(st.floats(-30.0, 30.0))
@settings(max_examples=50, deadline=None)
def test_softmax_shift_invariance(shift):
    z = np.array([[0.3, -1.2, 2.5]])
    np.testing.assert_allclose(softmax(z + shift), softmax(z), atol=1e-12)


def test_logit_known_values():
    assert logit_of_prob(np.array(0.5)) == 0.0
    assert logit_of_prob(np.array(0.9)) == pytest.approx(2.1972245773362196, abs=1e-15)
    # antisymmetry around 1/2
    p = np.array([0.1, 0.25, 0.4])
    np.testing.assert_allclose(logit_of_prob(p), -logit_of_prob(1.0 - p), atol=1e-12)


def test_logit_clamps_the_endpoints():
    lo = logit_of_prob(np.array([0.0, 1.0]))
    assert np.all(np.isfinite(lo))
    assert abs(lo[0]) < 30.0 and abs(lo[1]) < 30.0


def test_prob_of_logit_basics():
    assert prob_of_logit(np.array(0.0)) == 0.5
    assert prob_of_logit(np.array(40.0)) > 1.0 - 1e-12
    assert prob_of_logit(np.array(1.0)) == pytest.approx(0.7310585786300049, abs=1e-15)


@given(st.floats(1e-9, 1.0 - 1e-9))
@settings(max_examples=100, deadline=None)
def test_logit_prob_roundtrip(p):
    assert prob_of_logit(logit_of_prob(np.array(p))) == pytest.approx(p, abs=1e-9)


# --- PredictionMatrix --------------------------------------------------

def test_prediction_matrix_shapes_and_priors():
    scores = np.array([[2.0, 0.0, -1.0], [0.0, 1.0, 0.5], [3.0, 0.0, 0.0], [0.0, 0.0, 4.0]])
    labels = np.array([0, 1, 0, 2])
    data = PredictionMatrix(scores, labels, kind=RAW_LOGITS)
    assert data.n_samples == 4
    assert data.n_classes == 3
    np.testing.assert_allclose(data.class_priors(), [0.5, 0.25, 0.25])
    np.testing.assert_allclose(data.probabilities().sum(axis=1), 1.0, atol=1e-12)


def test_prediction_matrix_probabilities_passthrough():
    q = np.array([[0.7, 0.3], [0.2, 0.8]])
    data = PredictionMatrix(q, np.array([0, 1]), kind=PROBABILITIES)
    np.testing.assert_array_equal(data.probabilities(), q)


def test_prediction_matrix_rejections():
    good = np.array([[0.5, 0.5], [0.1, 0.9]])
    with pytest.raises(DataError):
        PredictionMatrix(good, np.array([0, 2]), kind=PROBABILITIES)  # label out of range
    with pytest.raises(DataError):
        PredictionMatrix(good, np.array([0]), kind=PROBABILITIES)  # length mismatch
    with pytest.raises(DataError):
        PredictionMatrix(np.array([[0.6, 0.6], [0.1, 0.9]]), np.array([0, 1]), kind=PROBABILITIES)
    with pytest.raises(DataError):
        PredictionMatrix(good, np.array([0, 1]), kind="scores")
    with pytest.raises(DataError):
        PredictionMatrix(np.array([[1.0], [0.5]]), np.array([0, 0]), kind=PROBABILITIES)  # K < 2


# --- BinaryCalibrationSet and one-vs-rest ------------------------------

def test_binary_set_validation():
    s = BinaryCalibrationSet(np.array([0.1, -0.4]), np.array([1, 0]))
    assert len(s) == 2
    with pytest.raises(DataError):
        BinaryCalibrationSet(np.array([0.1]), np.array([1, 0]))
    with pytest.raises(DataError):
        BinaryCalibrationSet(np.array([0.1, 0.2]), np.array([1, 2]))
    with pytest.raises(DataError):
        BinaryCalibrationSet(np.array([np.nan, 0.2]), np.array([1, 0]))


def test_ovr_targets_follow_the_labels():
    scores = np.array([[0.0, 1.0, 2.0], [2.0, 1.0, 0.0], [0.0, 0.0, 5.0]])
    labels = np.array([2, 0, 2])
    data = PredictionMatrix(scores, labels, kind=RAW_LOGITS)
    two = ovr_decompose(data, 2)
    np.testing.assert_array_equal(two.targets, [1, 0, 1])
    # a class that never occurs gets all-zero targets
    one = ovr_decompose(data, 1)
    assert one.targets.sum() == 0


def test_ovr_logits_come_from_the_normalized_row():
    q = np.array([[0.5, 0.5]])
    data = PredictionMatrix(q, np.array([0]), kind=PROBABILITIES)
    assert ovr_decompose(data, 0).logits[0] == pytest.approx(0.0, abs=1e-12)


def test_ovr_positive_counts_match_label_counts():
    rng = np.random.default_rng(4)
    data = PredictionMatrix(
        rng.normal(size=(60, 5)), rng.integers(0, 5, size=60), kind=RAW_LOGITS
    )
    for k in range(5):
        assert ovr_decompose(data, k).targets.sum() == np.sum(data.labels == k)


def test_merge_sets_concatenates():
    a = BinaryCalibrationSet(np.array([0.0, 1.0]), np.array([0, 1]), source_classes=(0,))
    b = BinaryCalibrationSet(np.array([2.0]), np.array([1]), source_classes=(1,))
    merged = merge_sets([a, b])
    assert len(merged) == 3
    assert merged.source_classes == frozenset({0, 1})
    np.testing.assert_array_equal(merged.logits, [0.0, 1.0, 2.0])
    with pytest.raises(DataError):
        merge_sets([])


def test_merge_sets_order_only_permutes():
    rng = np.random.default_rng(7)
    parts = [
        BinaryCalibrationSet(rng.normal(size=5), rng.integers(0, 2, size=5))
        for _ in range(3)
    ]
    ab = merge_sets([parts[0], parts[1], parts[2]])
    ba = merge_sets([parts[2], parts[0], parts[1]])
    np.testing.assert_array_equal(np.sort(ab.logits), np.sort(ba.logits))
    assert ab.targets.sum() == ba.targets.sum()


# --- class groupings ----------------------------------------------------

def test_group_helpers():
    g = group_all(4)
    assert g.groups == ((0, 1, 2, 3),)
    assert g.group_of(2) == 0
    s = group_singletons(4)
    assert len(s.groups) == 4
    assert s.group_of(3) == 3


def test_grouping_must_partition():
    with pytest.raises(DataError):
        ClassGrouping(groups=((0, 1), (1, 2)), n_classes=3)  # overlap
    with pytest.raises(DataError):
        ClassGrouping(groups=((0,), (2,)), n_classes=3)  # gap


def test_group_by_prior_orders_by_frequency():
    # class 2 is rare, class 0 common; ascending prior order decides membership
    labels = np.array([0] * 6 + [1] * 3 + [2] * 1)
    data = PredictionMatrix(np.zeros((10, 3)), labels, kind=RAW_LOGITS)
    g = group_by_prior(data, 2)
    assert g.group_of(2) == 0
    assert g.group_of(0) == 1


def test_group_by_prior_uniform_falls_back_to_index_order():
    labels = np.array([0, 1, 2, 3])
    data = PredictionMatrix(np.zeros((4, 4)), labels, kind=RAW_LOGITS)
    g = group_by_prior(data, 2)
    assert g.groups == ((0, 1), (2, 3))


def test_group_by_prior_rejects_too_many_groups():
    labels = np.array([0, 1])
    data = PredictionMatrix(np.zeros((2, 2)), labels, kind=RAW_LOGITS)
    with pytest.raises(DataError):
        group_by_prior(data, 3)
