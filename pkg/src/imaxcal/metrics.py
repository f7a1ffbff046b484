"""Calibration and ranking metrics with verifiable binning schemes.

Every ECE here is an explicit estimator: confidences are grouped either by
a named binning scheme over [0, 1] or by exact value (exact_grouping, the
right choice for discrete calibrators whose output takes few values), and
the reported number is the kept-count-weighted mean absolute gap between
group accuracy and group confidence.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .data import logit_of_prob
from .errors import DataError, FitError

SCHEME_EQ_SIZE = "eq_size"
SCHEME_EQ_MASS = "eq_mass"
SCHEME_KMEANS = "kmeans"
SCHEME_IMAX = "imax_eval"
SCHEME_EXACT = "exact_grouping"
EVAL_SCHEMES = (SCHEME_EQ_SIZE, SCHEME_EQ_MASS, SCHEME_KMEANS, SCHEME_IMAX, SCHEME_EXACT)

TIE_CLASS_INDEX = "class_index"
TIE_RAW_LOGIT = "raw_logit"

THRESHOLD_ZERO = "zero"
THRESHOLD_ONE_OVER_K = "one_over_k"
THRESHOLD_CLASS_PRIOR = "class_prior"
THRESHOLD_HALF = "half"
NAMED_THRESHOLDS = (
    THRESHOLD_ZERO,
    THRESHOLD_ONE_OVER_K,
    THRESHOLD_CLASS_PRIOR,
    THRESHOLD_HALF,
)


@dataclass
class EvalConfig:
    """Evaluation-side knobs; fitting knobs live in ImaxConfig."""

    eval_scheme: str = SCHEME_EQ_SIZE
    n_eval_bins: int = 100
    cw_thresholds: tuple = (THRESHOLD_CLASS_PRIOR,)
    top_k: tuple = (1, 5)
    tie_break: str = TIE_CLASS_INDEX
    bootstrap: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.eval_scheme not in EVAL_SCHEMES:
            raise DataError(f"unknown eval scheme {self.eval_scheme!r}")
        if self.n_eval_bins < 1:
            raise DataError("n_eval_bins must be >= 1")
        if self.tie_break not in (TIE_CLASS_INDEX, TIE_RAW_LOGIT):
            raise DataError(f"unknown tie break {self.tie_break!r}")
        self.cw_thresholds = tuple(self.cw_thresholds)
        for thr in self.cw_thresholds:
            if isinstance(thr, str):
                if thr not in NAMED_THRESHOLDS:
                    raise DataError(f"unknown threshold {thr!r}")
            elif not 0.0 <= float(thr) < 1.0:
                raise DataError("custom threshold must lie in [0, 1)")
        self.top_k = tuple(int(k) for k in self.top_k)
        if any(k < 1 for k in self.top_k):
            raise DataError("top_k entries must be >= 1")
        if self.bootstrap < 0:
            raise DataError("bootstrap count must be >= 0")


def _check_calibrated(calibrated, labels):
    calibrated = np.asarray(calibrated, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if calibrated.ndim != 2:
        raise DataError("calibrated scores must be 2-D")
    if labels.shape != (calibrated.shape[0],):
        raise DataError("labels length does not match calibrated scores")
    if calibrated.shape[0] == 0:
        raise DataError("empty evaluation set")
    if calibrated.min() < 0.0 or calibrated.max() > 1.0:
        raise DataError("calibrated scores must lie in [0, 1]")
    return calibrated, labels


def ranked_classes(calibrated, tie_break=TIE_CLASS_INDEX, raw_scores=None):
    """Per-row class ranking by calibrated probability, descending.

    Ties are resolved by ascending class index or by descending raw score;
    the raw-score rule needs the original score matrix.
    """
    calibrated = np.asarray(calibrated, dtype=np.float64)
    n, k = calibrated.shape
    if tie_break == TIE_CLASS_INDEX:
        secondary = np.broadcast_to(np.arange(k), (n, k))
    elif tie_break == TIE_RAW_LOGIT:
        if raw_scores is None:
            raise DataError("tie_break=raw_logit needs the raw score matrix")
        raw_scores = np.asarray(raw_scores, dtype=np.float64)
        if raw_scores.shape != calibrated.shape:
            raise DataError("raw score shape does not match calibrated scores")
        secondary = -raw_scores
    else:
        raise DataError(f"unknown tie break {tie_break!r}")
    return np.lexsort((secondary, -calibrated), axis=-1)


def accuracy_topk(
    calibrated, labels, k=1, tie_break=TIE_CLASS_INDEX, raw_scores=None
) -> float:
    """Fraction of samples whose label ranks in the top k classes."""
    calibrated, labels = _check_calibrated(calibrated, labels)
    order = ranked_classes(calibrated, tie_break, raw_scores)
    kk = min(int(k), calibrated.shape[1])
    hits = np.any(order[:, :kk] == labels[:, None], axis=1)
    return float(np.mean(hits))


def _kmeans_1d(values, n_bins, seed, max_iter=100, tol=1e-10):
    """Plain 1-D Lloyd iteration with squared-distance ++-style seeding."""
    rng = np.random.default_rng(seed)
    uniq = np.unique(values)
    if uniq.size <= n_bins:
        return uniq.astype(np.float64)

    centers = np.empty(n_bins)
    centers[0] = values[rng.integers(values.size)]
    d2 = (values - centers[0]) ** 2
    for j in range(1, n_bins):
        total = float(d2.sum())
        if total <= 0.0:
            centers = centers[:j]
            break
        centers[j] = values[rng.choice(values.size, p=d2 / total)]
        np.minimum(d2, (values - centers[j]) ** 2, out=d2)
    centers = np.unique(centers)

    values_sorted = np.sort(values)
    for _ in range(max_iter):
        cuts = (centers[:-1] + centers[1:]) / 2.0
        idx = np.searchsorted(cuts, values_sorted, side="right")
        sums = np.bincount(idx, weights=values_sorted, minlength=centers.size)
        cnts = np.bincount(idx, minlength=centers.size)
        occupied = cnts > 0
        new_centers = np.where(occupied, sums / np.maximum(cnts, 1), centers)
        movement = float(np.max(np.abs(new_centers - centers)))
        centers = np.unique(new_centers)
        if movement < tol:
            break
    return centers


def eval_bin_edges(values, scheme, n_bins, seed=0, targets=None):
    """Interior edges over [0, 1] for the named evaluation scheme.

    targets (0/1 correctness or label indicators) is required by imax_eval,
    which reuses the iterative fit on the logit of the confidences.
    """
    values = np.asarray(values, dtype=np.float64)
    if scheme == SCHEME_EQ_SIZE:
        return np.arange(1, n_bins) / n_bins
    if scheme == SCHEME_EQ_MASS:
        edges = np.quantile(values, np.arange(1, n_bins) / n_bins)
        uniq = np.unique(edges)
        if uniq.size < edges.size:
            warnings.warn(
                f"eq_mass eval edges collapsed {edges.size} -> {uniq.size} "
                "(tied quantiles)",
                RuntimeWarning,
                stacklevel=2,
            )
        return uniq
    if scheme == SCHEME_KMEANS:
        centers = _kmeans_1d(values, n_bins, seed)
        return (centers[:-1] + centers[1:]) / 2.0
    if scheme == SCHEME_IMAX:
        if targets is None:
            raise DataError("imax_eval scheme needs 0/1 targets")
        from .binning import ImaxConfig, fit_imax
        from .data import BinaryCalibrationSet, prob_of_logit

        cal = BinaryCalibrationSet(
            logits=logit_of_prob(values), targets=np.asarray(targets, dtype=np.int8)
        )
        binner = fit_imax(cal, ImaxConfig(n_bins=n_bins, seed=seed))
        return prob_of_logit(binner.edges)
    if scheme == SCHEME_EXACT:
        raise DataError("exact_grouping groups by value and has no edges")
    raise DataError(f"unknown eval scheme {scheme!r}")


def _grouped_gap(conf, correct, cfg, targets_for_edges=None):
    """Weighted mean |group accuracy - group confidence| under cfg's scheme."""
    n = conf.shape[0]
    if cfg.eval_scheme == SCHEME_EXACT:
        _, inverse, counts = np.unique(conf, return_inverse=True, return_counts=True)
        acc = np.bincount(inverse, weights=correct) / counts
        avg_conf = np.bincount(inverse, weights=conf) / counts
    else:
        edges = eval_bin_edges(
            conf,
            cfg.eval_scheme,
            cfg.n_eval_bins,
            seed=cfg.seed,
            targets=correct if targets_for_edges is None else targets_for_edges,
        )
        idx = np.searchsorted(edges, conf, side="right")
        m = len(edges) + 1
        counts = np.bincount(idx, minlength=m)
        keep = counts > 0
        acc = (np.bincount(idx, weights=correct, minlength=m) / np.maximum(counts, 1))[keep]
        avg_conf = (np.bincount(idx, weights=conf, minlength=m) / np.maximum(counts, 1))[keep]
        counts = counts[keep]
    return float(np.sum(counts / n * np.abs(acc - avg_conf)))


def top1_ece(calibrated, labels, cfg: EvalConfig | None = None, raw_scores=None) -> float:
    """ECE of the top-label confidence under the configured scheme."""
    cfg = cfg if cfg is not None else EvalConfig()
    calibrated, labels = _check_calibrated(calibrated, labels)
    order = ranked_classes(calibrated, cfg.tie_break, raw_scores)
    top = order[:, 0]
    conf = calibrated[np.arange(calibrated.shape[0]), top]
    correct = (top == labels).astype(np.float64)
    return _grouped_gap(conf, correct, cfg)


def resolve_threshold(thr, class_k, n_classes, priors):
    """Concrete threshold value for class k."""
    if isinstance(thr, str):
        if thr == THRESHOLD_ZERO:
            return 0.0
        if thr == THRESHOLD_ONE_OVER_K:
            return 1.0 / n_classes
        if thr == THRESHOLD_CLASS_PRIOR:
            return float(priors[class_k])
        if thr == THRESHOLD_HALF:
            return 0.5
        raise DataError(f"unknown threshold {thr!r}")
    return float(thr)


@dataclass
class CwEceResult:
    """Thresholded class-wise ECE: mean over all classes, with diagnostics."""

    mean: float
    per_class: np.ndarray
    kept_counts: np.ndarray
    zero_kept_classes: int
    threshold: object = THRESHOLD_CLASS_PRIOR


def cw_ece(calibrated, labels, cfg: EvalConfig | None = None, threshold=None) -> CwEceResult:
    """Thresholded class-wise ECE.

    Per class, only predictions with calibrated probability strictly above
    the threshold are kept and grouped under cfg's scheme; the class ECE
    normalizes by the kept count. Classes with nothing kept contribute 0
    to the mean over all K classes and are counted in the diagnostics.
    """
    cfg = cfg if cfg is not None else EvalConfig()
    calibrated, labels = _check_calibrated(calibrated, labels)
    if threshold is None:
        threshold = cfg.cw_thresholds[0]
    n, k = calibrated.shape
    priors = np.array([np.mean(labels == c) for c in range(k)])

    per_class = np.zeros(k)
    kept_counts = np.zeros(k, dtype=np.int64)
    zero_kept = 0
    for c in range(k):
        thr = resolve_threshold(threshold, c, k, priors)
        conf = calibrated[:, c]
        kept = conf > thr
        kept_counts[c] = int(kept.sum())
        if kept_counts[c] == 0:
            zero_kept += 1
            continue
        hit = (labels[kept] == c).astype(np.float64)
        per_class[c] = _grouped_gap(conf[kept], hit, cfg)
    return CwEceResult(
        mean=float(per_class.mean()),
        per_class=per_class,
        kept_counts=kept_counts,
        zero_kept_classes=zero_kept,
        threshold=threshold,
    )


def nll(calibrated, labels) -> float:
    """Mean negative log-likelihood of the labeled class (clamped)."""
    from .data import PROB_EPS

    calibrated, labels = _check_calibrated(calibrated, labels)
    q = np.clip(calibrated[np.arange(calibrated.shape[0]), labels], PROB_EPS, 1.0)
    return float(np.mean(-np.log(q)))


def brier(calibrated, labels) -> float:
    """Mean squared distance to the one-hot label, rows not renormalized."""
    calibrated, labels = _check_calibrated(calibrated, labels)
    n = calibrated.shape[0]
    q_true = calibrated[np.arange(n), labels]
    return float(np.mean(np.sum(calibrated**2, axis=1) - 2.0 * q_true + 1.0))


def mi_from_joint(joint) -> float:
    """Plug-in mutual information (nats) from a (M, Y) joint count table."""
    joint = np.asarray(joint, dtype=np.float64)
    total = joint.sum()
    if total <= 0:
        raise DataError("joint counts are empty")
    p = joint / total
    pm = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    terms = xlogy(p, p) - xlogy(p, pm * py)
    return float(max(terms.sum(), 0.0))


def mi_of_quantizer(binner, cal_set) -> float:
    """Empirical MI (nats) between bin index and binary target."""
    from .binning import quantize

    idx = quantize(binner, cal_set.logits)
    m = binner.n_bins if hasattr(binner, "n_bins") else int(idx.max()) + 1
    joint = np.zeros((m, 2))
    np.add.at(joint, (idx, cal_set.targets.astype(np.int64)), 1.0)
    return mi_from_joint(joint)


@dataclass
class BootstrapResult:
    mean: float
    std: float
    n_resamples: int
    degenerate: bool = False


def bootstrap_metric(metric_fn, n_samples, n_resamples, seed=0) -> BootstrapResult:
    """Resample-with-replacement dispersion of a metric closure.

    metric_fn receives an index array into the evaluation set. With a
    single resample the std is undefined and reported as 0 with the
    degenerate flag set.
    """
    if n_resamples < 1:
        raise DataError("need at least one bootstrap resample")
    rng = np.random.default_rng(seed)
    vals = np.array(
        [
            float(metric_fn(rng.integers(0, n_samples, size=n_samples)))
            for _ in range(n_resamples)
        ]
    )
    if n_resamples == 1:
        return BootstrapResult(float(vals[0]), 0.0, 1, degenerate=True)
    return BootstrapResult(float(vals.mean()), float(vals.std(ddof=1)), n_resamples)


@dataclass
class MetricReport:
    """One evaluation pass: ranking, calibration, and proper-score metrics."""

    n_samples: int
    n_classes: int
    config: EvalConfig
    accuracy: dict = field(default_factory=dict)
    top1: float = 0.0
    cw: dict = field(default_factory=dict)
    nll_value: float = 0.0
    brier_value: float = 0.0
    bootstrap_std: dict = field(default_factory=dict)

    def rows(self):
        """(metric, threshold, value, std) rows; one row per threshold."""
        out = []
        for k, v in self.accuracy.items():
            out.append((f"acc_top{k}", "", v, self.bootstrap_std.get(f"acc_top{k}")))
        out.append(("top1_ece", "", self.top1, self.bootstrap_std.get("top1_ece")))
        for label, res in self.cw.items():
            out.append(
                (
                    "cw_ece",
                    label,
                    res.mean,
                    self.bootstrap_std.get(f"cw_ece[{label}]"),
                )
            )
        out.append(("nll", "", self.nll_value, self.bootstrap_std.get("nll")))
        out.append(("brier", "", self.brier_value, self.bootstrap_std.get("brier")))
        return out

    def to_dict(self) -> dict:
        payload = {
            "n_samples": self.n_samples,
            "n_classes": self.n_classes,
            "eval_scheme": self.config.eval_scheme,
            "n_eval_bins": self.config.n_eval_bins,
            "tie_break": self.config.tie_break,
            "accuracy": {f"top{k}": v for k, v in self.accuracy.items()},
            "top1_ece": self.top1,
            "cw_ece": {
                label: {
                    "mean": res.mean,
                    "zero_kept_classes": res.zero_kept_classes,
                    "per_class": [float(v) for v in res.per_class],
                }
                for label, res in self.cw.items()
            },
            "nll": self.nll_value,
            "brier": self.brier_value,
        }
        if self.bootstrap_std:
            payload["bootstrap"] = {
                "n_resamples": self.config.bootstrap,
                "seed": self.config.seed,
                "std": dict(self.bootstrap_std),
            }
        return payload

    def to_text(self) -> str:
        lines = [f"{'metric':<24}{'threshold':<14}{'value':>12}{'std':>12}"]
        for name, thr, val, std in self.rows():
            std_s = "" if std is None else f"{std:.6f}"
            lines.append(f"{name:<24}{str(thr):<14}{val:>12.6f}{std_s:>12}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        lines = ["metric,threshold,value,std"]
        for name, thr, val, std in self.rows():
            std_s = "" if std is None else repr(float(std))
            lines.append(f"{name},{thr},{repr(float(val))},{std_s}")
        return "\n".join(lines) + "\n"


def threshold_label(thr) -> str:
    return thr if isinstance(thr, str) else repr(float(thr))


def build_report(calibrated, labels, cfg: EvalConfig, raw_scores=None) -> MetricReport:
    """Compute the full metric set, with optional bootstrap dispersion."""
    calibrated, labels = _check_calibrated(calibrated, labels)
    raw = None if raw_scores is None else np.asarray(raw_scores, dtype=np.float64)

    def compute(idx):
        cal = calibrated[idx]
        lab = labels[idx]
        rw = None if raw is None else raw[idx]
        rep = {}
        for k in cfg.top_k:
            rep[f"acc_top{k}"] = accuracy_topk(cal, lab, k, cfg.tie_break, rw)
        rep["top1_ece"] = top1_ece(cal, lab, cfg, rw)
        for thr in cfg.cw_thresholds:
            rep[f"cw_ece[{threshold_label(thr)}]"] = cw_ece(cal, lab, cfg, thr).mean
        rep["nll"] = nll(cal, lab)
        rep["brier"] = brier(cal, lab)
        return rep

    report = MetricReport(
        n_samples=calibrated.shape[0], n_classes=calibrated.shape[1], config=cfg
    )
    for k in cfg.top_k:
        report.accuracy[k] = accuracy_topk(calibrated, labels, k, cfg.tie_break, raw)
    report.top1 = top1_ece(calibrated, labels, cfg, raw)
    for thr in cfg.cw_thresholds:
        report.cw[threshold_label(thr)] = cw_ece(calibrated, labels, cfg, thr)
    report.nll_value = nll(calibrated, labels)
    report.brier_value = brier(calibrated, labels)

    if cfg.bootstrap > 0:
        rng = np.random.default_rng(cfg.seed)
        n = calibrated.shape[0]
        samples = {}
        for _ in range(cfg.bootstrap):
            idx = rng.integers(0, n, size=n)
            for name, val in compute(idx).items():
                samples.setdefault(name, []).append(val)
        degenerate = cfg.bootstrap == 1
        report.bootstrap_std = {
            name: (0.0 if degenerate else float(np.std(vals, ddof=1)))
            for name, vals in samples.items()
        }
    return report
