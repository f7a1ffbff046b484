"""Core data types and probability-domain transforms.

Multi-class calibration here works one class at a time: a score matrix is
decomposed into K one-vs-rest binary problems on the log-odds scale, and
calibrators consume those binary sets. Probabilities are clamped away from
{0, 1} before the log-odds transform so every logit is finite.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .errors import DataError

# Probability clamp bound: logits stay within ~ +/- 27.6.
PROB_EPS = 1e-12

RAW_LOGITS = "raw_logits"
PROBABILITIES = "probabilities"

_ROW_SUM_TOL = 1e-6


def softmax(scores):
    """Row-wise softmax, shift-invariant and safe for large scores.

    Accepts a single score vector or an (N, K) matrix; rejects non-finite
    input rather than propagating NaN into downstream transforms.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise DataError("softmax input contains non-finite values")
    shifted = scores - np.max(scores, axis=-1, keepdims=True)
    ex = np.exp(shifted)
    return ex / np.sum(ex, axis=-1, keepdims=True)


def logit_of_prob(q):
    """Log-odds of a probability, clamped to [PROB_EPS, 1 - PROB_EPS] first."""
    q = np.clip(np.asarray(q, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    return np.log(q) - np.log1p(-q)


def prob_of_logit(lam):
    """Sigmoid, the inverse of logit_of_prob away from the clamp bounds."""
    return expit(np.asarray(lam, dtype=np.float64))


def as_probabilities(scores, kind):
    """Validate a bare score matrix and return it as probabilities.

    Label-free twin of PredictionMatrix validation, for apply-time paths.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise DataError(f"scores must be 2-D, got shape {scores.shape}")
    if scores.shape[0] < 1 or scores.shape[1] < 2:
        raise DataError("scores must be N x K with N >= 1, K >= 2")
    if not np.all(np.isfinite(scores)):
        raise DataError("scores contain non-finite values")
    if kind == RAW_LOGITS:
        return softmax(scores)
    if kind == PROBABILITIES:
        if scores.min() < 0.0 or scores.max() > 1.0:
            raise DataError("probability scores outside [0, 1]")
        if np.max(np.abs(scores.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise DataError("probability rows do not sum to 1")
        return scores
    raise DataError(f"unknown score kind {kind!r}")


@dataclass
class PredictionMatrix:
    """Classifier outputs for N samples over K classes plus integer labels.

    kind says whether scores are raw logits (softmax applied on decomposition)
    or probabilities (rows must already lie on the simplex).
    """

    scores: np.ndarray
    labels: np.ndarray
    kind: str = RAW_LOGITS

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.scores.ndim != 2:
            raise DataError(f"scores must be 2-D, got shape {self.scores.shape}")
        n, k = self.scores.shape
        if n < 1:
            raise DataError("need at least one sample")
        if k < 2:
            raise DataError(f"need at least two classes, got {k}")
        if self.labels.shape != (n,):
            raise DataError(
                f"labels shape {self.labels.shape} does not match {n} samples"
            )
        if self.labels.min() < 0 or self.labels.max() >= k:
            raise DataError("labels out of range [0, K)")
        if not np.all(np.isfinite(self.scores)):
            raise DataError("scores contain non-finite values")
        if self.kind not in (RAW_LOGITS, PROBABILITIES):
            raise DataError(f"unknown score kind {self.kind!r}")
        if self.kind == PROBABILITIES:
            if self.scores.min() < 0.0 or self.scores.max() > 1.0:
                raise DataError("probability scores outside [0, 1]")
            sums = self.scores.sum(axis=1)
            if np.max(np.abs(sums - 1.0)) > _ROW_SUM_TOL:
                raise DataError("probability rows do not sum to 1")

    @property
    def n_samples(self):
        return self.scores.shape[0]

    @property
    def n_classes(self):
        return self.scores.shape[1]

    def probabilities(self):
        """Scores as probabilities, applying softmax to raw logits."""
        if self.kind == PROBABILITIES:
            return self.scores
        return softmax(self.scores)

    def class_priors(self):
        """Empirical label frequencies, shape (K,)."""
        return np.bincount(self.labels, minlength=self.n_classes) / self.n_samples


@dataclass
class BinaryCalibrationSet:
    """One-vs-rest view of one or more classes: logits plus 0/1 targets."""

    logits: np.ndarray
    targets: np.ndarray
    source_classes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.logits = np.asarray(self.logits, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.int8)
        if self.logits.ndim != 1 or self.targets.ndim != 1:
            raise DataError("logits and targets must be 1-D")
        if self.logits.shape[0] != self.targets.shape[0]:
            raise DataError("logits and targets length mismatch")
        if self.logits.shape[0] < 1:
            raise DataError("empty calibration set")
        if not np.all(np.isfinite(self.logits)):
            raise DataError("logits contain non-finite values")
        bad = (self.targets != 0) & (self.targets != 1)
        if np.any(bad):
            raise DataError("targets must be 0 or 1")
        self.source_classes = frozenset(self.source_classes)

    def __len__(self):
        return self.logits.shape[0]


def ovr_decompose(data: PredictionMatrix, class_k: int) -> BinaryCalibrationSet:
    """One-vs-rest binary set for class k on the log-odds scale."""
    if not 0 <= class_k < data.n_classes:
        raise DataError(f"class index {class_k} out of range")
    q = data.probabilities()[:, class_k]
    return BinaryCalibrationSet(
        logits=logit_of_prob(q),
        targets=(data.labels == class_k).astype(np.int8),
        source_classes=frozenset({class_k}),
    )


def merge_sets(sets) -> BinaryCalibrationSet:
    """Concatenate binary sets into one shared pool (order preserved)."""
    sets = list(sets)
    if not sets:
        raise DataError("merge_sets needs at least one set")
    return BinaryCalibrationSet(
        logits=np.concatenate([s.logits for s in sets]),
        targets=np.concatenate([s.targets for s in sets]),
        source_classes=frozenset().union(*(s.source_classes for s in sets)),
    )


MODE_ONE_FOR_ALL = "one_for_all"
MODE_BY_PRIOR = "by_prior_quantile"
MODE_EXPLICIT = "explicit"


@dataclass
class ClassGrouping:
    """Partition of the K class indices into calibrator-sharing groups."""

    groups: tuple
    mode: str = MODE_EXPLICIT
    n_classes: int = 0

    def __post_init__(self):
        groups = tuple(tuple(sorted(int(c) for c in g)) for g in self.groups)
        if not groups or any(len(g) == 0 for g in groups):
            raise DataError("grouping needs non-empty groups")
        flat = [c for g in groups for c in g]
        if len(flat) != len(set(flat)):
            raise DataError("groups overlap")
        k = self.n_classes or (max(flat) + 1)
        if sorted(flat) != list(range(k)):
            raise DataError(f"groups must cover classes 0..{k - 1} exactly")
        self.groups = groups
        self.n_classes = k

    def group_of(self, class_k: int) -> int:
        for i, g in enumerate(self.groups):
            if class_k in g:
                return i
        raise DataError(f"class {class_k} not in grouping")


def group_all(n_classes: int) -> ClassGrouping:
    """Single shared group over every class."""
    return ClassGrouping(
        groups=(tuple(range(n_classes)),), mode=MODE_ONE_FOR_ALL, n_classes=n_classes
    )


def group_singletons(n_classes: int) -> ClassGrouping:
    """Every class its own group (the class-wise strategy)."""
    return ClassGrouping(
        groups=tuple((k,) for k in range(n_classes)),
        mode=MODE_EXPLICIT,
        n_classes=n_classes,
    )


def group_by_prior(data: PredictionMatrix, n_groups: int) -> ClassGrouping:
    """Cut classes into n_groups contiguous blocks of the empirical-prior order.

    Priors come from the calibration split handed in here. Ties are broken by
    class index so the grouping is deterministic.
    """
    k = data.n_classes
    if not 1 <= n_groups <= k:
        raise DataError(f"n_groups must be in [1, {k}], got {n_groups}")
    priors = data.class_priors()
    order = np.lexsort((np.arange(k), priors))
    bounds = [round(i * k / n_groups) for i in range(n_groups + 1)]
    groups = tuple(tuple(order[bounds[i] : bounds[i + 1]]) for i in range(n_groups))
    return ClassGrouping(groups=groups, mode=MODE_BY_PRIOR, n_classes=k)
