"""ECE variants, ranking metrics, mutual information, and the report object."""

import math
import warnings

import numpy as np
import pytest

from imaxcal import BinaryCalibrationSet, DataError, EvalConfig
from imaxcal.binning import METHOD_EQ_SIZE, binner_from_edges, fit_binner, ImaxConfig, METHOD_IMAX
from imaxcal.metrics import (
    SCHEME_EQ_MASS,
    SCHEME_EQ_SIZE,
    SCHEME_EXACT,
    SCHEME_IMAX,
    SCHEME_KMEANS,
    THRESHOLD_CLASS_PRIOR,
    THRESHOLD_HALF,
    THRESHOLD_ONE_OVER_K,
    THRESHOLD_ZERO,
    TIE_CLASS_INDEX,
    TIE_RAW_LOGIT,
    accuracy_topk,
    bootstrap_metric,
    brier,
    build_report,
    cw_ece,
    eval_bin_edges,
    mi_from_joint,
    mi_of_quantizer,
    nll,
    ranked_classes,
    top1_ece,
)
from imaxcal.synth import BinaryMixtureSpec, gen_binary_mixture


EXACT = EvalConfig(eval_scheme=SCHEME_EXACT)


# --- config validation ---------------------------------------------------

def test_eval_config_validation():
    with pytest.raises(DataError):
        EvalConfig(eval_scheme="histogram")
    with pytest.raises(DataError):
        EvalConfig(n_eval_bins=0)
    with pytest.raises(DataError):
        EvalConfig(tie_break="random")
    with pytest.raises(DataError):
        EvalConfig(cw_thresholds=("quartile",))
    with pytest.raises(DataError):
        EvalConfig(cw_thresholds=(1.5,))
    with pytest.raises(DataError):
        EvalConfig(bootstrap=-1)


# --- ranking and accuracy -------------------------------------------------

def test_ranked_classes_tie_goes_to_the_lower_index():
    cal = np.array([[0.4, 0.4, 0.2]])
    top = ranked_classes(cal)[:, 0]
    assert top[0] == 0


def test_raw_logit_tie_break_consults_the_raw_scores():
    cal = np.array([[0.4, 0.4, 0.2]])
    raw = np.array([[1.0, 3.0, 0.0]])
    top = ranked_classes(cal, tie_break=TIE_RAW_LOGIT, raw_scores=raw)[:, 0]
    assert top[0] == 1
    with pytest.raises(DataError):
        ranked_classes(cal, tie_break=TIE_RAW_LOGIT)


def test_accuracy_topk_basics():
    cal = np.array([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7], [0.5, 0.4, 0.1]])
    labels = np.array([0, 2, 1])
    assert accuracy_topk(cal, labels, k=1) == pytest.approx(2.0 / 3.0)
    assert accuracy_topk(cal, labels, k=2) == 1.0
    # k beyond the class count saturates
    assert accuracy_topk(cal, labels, k=10) == 1.0


# --- evaluation bin edges --------------------------------------------------

def test_eq_size_eval_edges_are_uniform():
    np.testing.assert_array_equal(
        eval_bin_edges(np.array([0.1, 0.9]), SCHEME_EQ_SIZE, 4), [0.25, 0.5, 0.75]
    )


def test_eq_mass_eval_edges_use_quantiles():
    vals = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(eval_bin_edges(vals, SCHEME_EQ_MASS, 2), [0.25])


def test_eq_mass_eval_collapses_ties_with_a_warning():
    vals = np.repeat([0.3, 0.5, 0.7], 40).astype(np.float64)
    with pytest.warns(RuntimeWarning):
        edges = eval_bin_edges(vals, SCHEME_EQ_MASS, 10)
    np.testing.assert_array_equal(edges, [0.3, 0.5, 0.7])


def test_kmeans_eval_edge_splits_two_clusters():
    rng = np.random.default_rng(0)
    vals = np.concatenate(
        [0.2 + 0.02 * rng.standard_normal(60), 0.8 + 0.02 * rng.standard_normal(60)]
    )
    vals = np.clip(vals, 0.0, 1.0)
    edge = eval_bin_edges(vals, SCHEME_KMEANS, 2, seed=0)[0]
    assert 0.25 < edge < 0.75


def test_imax_eval_edges_are_confidence_space_cuts():
    rng = np.random.default_rng(2)
    conf = rng.uniform(0.05, 0.95, size=400)
    correct = (rng.random(400) < conf).astype(np.int64)
    edges = eval_bin_edges(conf, SCHEME_IMAX, 4, seed=0, targets=correct)
    assert edges.size == 3
    assert np.all(np.diff(edges) > 0)
    assert edges[0] > 0.0 and edges[-1] < 1.0
    with pytest.raises(DataError):
        eval_bin_edges(conf, SCHEME_IMAX, 4, seed=0)  # no targets given


def test_exact_grouping_has_no_edges():
    with pytest.raises(DataError):
        eval_bin_edges(np.array([0.1, 0.2]), SCHEME_EXACT, 4)
    with pytest.raises(DataError):
        eval_bin_edges(np.array([0.1, 0.2]), "voronoi", 4)


# --- top-1 ECE --------------------------------------------------------------

def test_top1_ece_hand_case():
    # two confidence levels: 0.8 with 3/5 correct, 0.4 with 2/5 correct
    cal = np.vstack([np.tile([0.8, 0.1], (5, 1)), np.tile([0.4, 0.1], (5, 1))])
    labels = np.array([0, 0, 0, 1, 1, 0, 0, 1, 1, 1])
    assert top1_ece(cal, labels, EXACT) == pytest.approx(0.10, abs=1e-12)


def test_top1_ece_of_overconfident_constant():
    cal = np.tile([1.0, 0.0], (10, 1))
    labels = np.array([0] * 8 + [1] * 2)
    assert top1_ece(cal, labels, EXACT) == pytest.approx(0.2, abs=1e-12)
    binned = EvalConfig(eval_scheme=SCHEME_EQ_SIZE, n_eval_bins=100)
    assert top1_ece(cal, labels, binned) == pytest.approx(0.2, abs=1e-12)


def test_top1_ece_zero_for_self_consistent_discrete_levels():
    rng = np.random.default_rng(3)
    levels = np.array([0.55, 0.7, 0.9])
    conf = rng.choice(levels, size=3000)
    correct = rng.random(3000) < conf
    labels = np.where(correct, 0, 1)
    cal = np.stack([conf, 1.0 - conf], axis=1)
    # exact grouping measures only sampling noise here
    assert top1_ece(cal, labels, EXACT) < 0.05


def test_exact_grouping_ignores_the_bin_count():
    rng = np.random.default_rng(4)
    conf = rng.uniform(0.4, 1.0, size=500)
    cal = np.stack([conf, 1.0 - conf], axis=1)
    labels = (rng.random(500) > conf).astype(np.int64)
    values = [
        top1_ece(cal, labels, EvalConfig(eval_scheme=SCHEME_EXACT, n_eval_bins=n))
        for n in (10, 100, 1000)
    ]
    assert values[0] == values[1] == values[2]


# --- class-wise ECE ----------------------------------------------------------

def test_cw_ece_hand_case():
    cal = np.array([[0.8, 0.1], [0.8, 0.1]])
    res = cw_ece(cal, np.array([0, 1]), EXACT, threshold=THRESHOLD_HALF)
    assert res.per_class[0] == pytest.approx(0.3, abs=1e-12)
    assert res.per_class[1] == 0.0
    assert res.zero_kept_classes == 1
    assert res.kept_counts.tolist() == [2, 0]
    assert res.mean == pytest.approx(0.15, abs=1e-12)


def test_cw_threshold_strictness():
    # a score exactly at the threshold is dropped
    cal = np.array([[0.5, 0.5], [0.6, 0.4]])
    res = cw_ece(cal, np.array([0, 0]), EXACT, threshold=0.5)
    assert res.kept_counts.tolist() == [1, 0]


def test_cw_ece_threshold_variants_run():
    rng = np.random.default_rng(5)
    cal = rng.dirichlet(np.ones(4), size=300)
    labels = rng.integers(0, 4, size=300)
    for thr in (THRESHOLD_ZERO, THRESHOLD_ONE_OVER_K, THRESHOLD_CLASS_PRIOR, THRESHOLD_HALF, 0.3):
        res = cw_ece(cal, labels, EXACT, threshold=thr)
        assert 0.0 <= res.mean <= 1.0
        assert res.per_class.size == 4


def test_cw_class0_gap_matches_top1_when_class0_always_wins():
    # rows [q, 1-q] with q > 1/2: class 0 is always the argmax, so its
    # thresholded-at-zero class gap is exactly the top-1 gap
    rng = np.random.default_rng(6)
    q = rng.uniform(0.5 + 1e-6, 1.0, size=400)
    hit = rng.random(400) < q
    pair = np.stack([q, 1.0 - q], axis=1)
    pair_labels = np.where(hit, 0, 1)
    res = cw_ece(pair, pair_labels, EXACT, threshold=THRESHOLD_ZERO)
    assert res.per_class[0] == pytest.approx(top1_ece(pair, pair_labels, EXACT), abs=1e-12)


# --- proper scores ------------------------------------------------------------

def test_nll_and_brier_known_values():
    assert nll(np.array([[0.8, 0.2]]), np.array([0])) == pytest.approx(
        -math.log(0.8), abs=1e-12
    )
    assert brier(np.array([[0.8, 0.2]]), np.array([0])) == pytest.approx(0.08, abs=1e-12)
    assert brier(np.array([[0.5, 0.5]]), np.array([1])) == pytest.approx(0.5, abs=1e-12)


def test_nll_clamps_rather_than_diverging():
    v = nll(np.array([[0.0, 1.0]]), np.array([0]))
    assert np.isfinite(v) and v > 20.0


def test_scores_are_permutation_invariant():
    rng = np.random.default_rng(7)
    cal = rng.dirichlet(np.ones(5), size=100)
    labels = rng.integers(0, 5, size=100)
    perm = rng.permutation(100)
    assert nll(cal[perm], labels[perm]) == pytest.approx(nll(cal, labels), rel=1e-12)
    assert brier(cal[perm], labels[perm]) == pytest.approx(brier(cal, labels), rel=1e-12)


# --- mutual information ---------------------------------------------------------

def test_mi_from_joint_known_values():
    j = np.array([[30.0, 10.0], [10.0, 30.0]])
    closed = 0.75 * math.log(1.5) - 0.25 * math.log(2.0)
    assert mi_from_joint(j) == pytest.approx(closed, rel=1e-12)
    # one bin carries no information
    assert mi_from_joint(np.array([[40.0], [60.0]])) == 0.0
    with pytest.raises(DataError):
        mi_from_joint(np.zeros((2, 2)))


def test_mi_perfect_separation_reaches_log2():
    j = np.array([[50.0, 0.0], [0.0, 50.0]])
    assert mi_from_joint(j) == pytest.approx(math.log(2.0), abs=1e-12)


def test_mi_is_invariant_to_bin_relabeling():
    cal, _ = gen_binary_mixture(BinaryMixtureSpec(n=2000, seed=0))
    b = fit_binner(cal, METHOD_IMAX, ImaxConfig(n_bins=4, seed=0))
    mirrored = binner_from_edges(-b.edges[::-1], METHOD_EQ_SIZE)
    flipped = BinaryCalibrationSet(-cal.logits, cal.targets)
    assert mi_of_quantizer(mirrored, flipped) == pytest.approx(
        mi_of_quantizer(b, cal), rel=1e-12
    )


# --- bootstrap -------------------------------------------------------------------

def test_bootstrap_single_resample_is_degenerate():
    res = bootstrap_metric(lambda idx: 1.0, 100, 1, seed=0)
    assert res.degenerate
    assert res.std == 0.0


def test_bootstrap_constant_metric_has_zero_std():
    res = bootstrap_metric(lambda idx: 0.25, 100, 20, seed=0)
    assert res.std == 0.0 and not res.degenerate


def test_bootstrap_std_shrinks_with_sample_size():
    def make(n):
        x = np.random.default_rng(0).normal(size=n)
        return lambda idx: float(np.mean(x[idx]))

    small = bootstrap_metric(make(500), 500, 40, seed=1)
    big = bootstrap_metric(make(50_000), 50_000, 40, seed=1)
    ratio = small.std / big.std
    # sqrt(100) = 10 up to resampling noise
    assert 3.0 < ratio < 33.0


def test_bootstrap_is_deterministic_in_the_seed():
    metric = lambda idx: float(np.mean(idx))
    a = bootstrap_metric(metric, 50, 10, seed=3)
    b = bootstrap_metric(metric, 50, 10, seed=3)
    assert a.mean == b.mean and a.std == b.std
    with pytest.raises(DataError):
        bootstrap_metric(metric, 50, 0, seed=3)


# --- report ------------------------------------------------------------------------

def _report_inputs(n=400, k=4, seed=8):
    rng = np.random.default_rng(seed)
    cal = rng.dirichlet(np.ones(k), size=n)
    labels = rng.integers(0, k, size=n)
    return cal, labels


def test_report_dict_layout():
    cal, labels = _report_inputs()
    cfg = EvalConfig()
    doc = build_report(cal, labels, cfg).to_dict()
    assert doc["n_samples"] == 400
    assert doc["n_classes"] == 4
    assert doc["eval_scheme"] == SCHEME_EQ_SIZE
    assert doc["n_eval_bins"] == 100
    assert set(doc["accuracy"]) == {"top1", "top5"}
    assert "class_prior" in doc["cw_ece"]
    assert 0.0 <= doc["top1_ece"] <= 1.0
    assert doc["nll"] > 0.0
    assert "bootstrap" not in doc


def test_report_csv_round_trips_values():
    cal, labels = _report_inputs(seed=9)
    cfg = EvalConfig(
        cw_thresholds=(THRESHOLD_CLASS_PRIOR, THRESHOLD_HALF, THRESHOLD_ONE_OVER_K, THRESHOLD_ZERO)
    )
    report = build_report(cal, labels, cfg)
    lines = report.to_csv().strip().splitlines()
    assert lines[0] == "metric,threshold,value,std"
    rows = [line.split(",") for line in lines[1:]]
    by_name = {(r[0], r[1]): r[2] for r in rows}
    # repr-format values parse back to the exact float
    assert float(by_name[("top1_ece", "")]) == report.to_dict()["top1_ece"]
    cw_rows = [r for r in rows if r[0] == "cw_ece"]
    assert [r[1] for r in cw_rows] == ["class_prior", "half", "one_over_k", "zero"]


def test_report_bootstrap_block():
    cal, labels = _report_inputs(seed=10)
    cfg = EvalConfig(bootstrap=8, seed=5)
    doc = build_report(cal, labels, cfg).to_dict()
    assert doc["bootstrap"]["n_resamples"] == 8
    assert doc["bootstrap"]["std"]["top1_ece"] >= 0.0
    # std column shows up in the CSV when resampling ran
    csv_lines = build_report(cal, labels, cfg).to_csv().strip().splitlines()
    top1_row = next(line for line in csv_lines if line.startswith("top1_ece"))
    assert top1_row.split(",")[3] != ""


def test_report_text_mentions_the_headline_metrics():
    cal, labels = _report_inputs(seed=11)
    text = build_report(cal, labels, EvalConfig()).to_text()
    for needle in ("top1_ece", "nll", "brier", "acc_top1"):
        assert needle in text
