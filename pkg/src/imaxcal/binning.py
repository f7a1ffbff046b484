"""Histogram binning calibrators.

A Binner carries M-1 interior edges on the logit axis plus per-bin phi
levels and (once assigned) per-bin probability representatives. Edges can
come from fixed rules (eq_size, eq_mass) or from the iterative
mutual-information-maximizing fit, which alternates closed-form edge and
phi updates until the edges stop moving.

The iterative updates assume the sigmoid model P(y=1 | lam) ~ sigmoid(t)
with t = scale * (lam + bias); the default scale=1, bias=0 uses the logit
itself. Each phi level is a quasi-arithmetic mean of its bin's t values, so
phi levels stay inside their bin's t interval and strict monotonicity of
phis (and hence of the closed-form edges between them) is preserved by
every update.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, xlogy

from . import kernels
from .data import PROB_EPS, BinaryCalibrationSet, logit_of_prob
from .errors import DataError, FitError

METHOD_EQ_SIZE = "eq_size"
METHOD_EQ_MASS = "eq_mass"
METHOD_IMAX = "imax"

REP_EMPIRICAL_FREQ = "empirical_freq"
REP_RAW_PROB_MEAN = "raw_prob_mean"
REP_SCALED_PROB_MEAN = "scaled_prob_mean"
REP_STRATEGIES = (REP_EMPIRICAL_FREQ, REP_RAW_PROB_MEAN, REP_SCALED_PROB_MEAN)

_BINNER_JSON_FIELDS = ("method", "edges", "phis", "reps", "seed", "iterations")


@dataclass
class ImaxConfig:
    """Knobs for the iterative fit."""

    n_bins: int = 15
    max_iterations: int = 200
    tolerance: float = 1e-10
    seed: int = 0
    scale: float = 1.0
    bias: float = 0.0

    def __post_init__(self):
        if self.n_bins < 2:
            raise DataError(f"n_bins must be >= 2, got {self.n_bins}")
        if self.max_iterations < 1:
            raise DataError("max_iterations must be >= 1")
        if self.tolerance < 0:
            raise DataError("tolerance must be >= 0")
        if not self.scale > 0:
            raise DataError("scale must be > 0")


@dataclass
class FitTrace:
    """Per-pair diagnostics from the iterative fit.

    loss is the sigmoid-model weighted NLL after each completed
    (edge update, phi update) pair; it is non-increasing by construction.
    hard_loss is surrogate_loss (label NLL) at the same checkpoints, which
    tracks loss statistically but carries no monotonicity guarantee.
    """

    loss: np.ndarray
    hard_loss: np.ndarray
    empty_bin_events: int = 0
    init_phis: np.ndarray | None = None


@dataclass
class Binner:
    """Monotone step-function calibrator over logit bins."""

    edges: np.ndarray
    phis: np.ndarray
    reps: np.ndarray | None = None
    method: str = METHOD_IMAX
    iterations: int = 0
    seed: int | None = None
    diagnostics: FitTrace | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.float64)
        self.phis = np.asarray(self.phis, dtype=np.float64)
        if self.edges.ndim != 1 or self.phis.ndim != 1:
            raise FitError("edges and phis must be 1-D")
        if self.phis.shape[0] != self.edges.shape[0] + 1:
            raise FitError("need exactly one phi level per bin")
        if self.edges.size and np.any(np.diff(self.edges) <= 0):
            raise FitError("edges must be strictly increasing")
        if not np.all(np.isfinite(self.edges)) or not np.all(np.isfinite(self.phis)):
            raise FitError("edges and phis must be finite")
        if self.reps is not None:
            self.reps = np.asarray(self.reps, dtype=np.float64)
            if self.reps.shape != self.phis.shape:
                raise FitError("need exactly one representative per bin")
            if self.reps.min() < 0.0 or self.reps.max() > 1.0:
                raise FitError("representatives must lie in [0, 1]")

    @property
    def n_bins(self):
        return self.phis.shape[0]

    def to_json(self) -> str:
        payload = {
            "method": self.method,
            "edges": [float(v) for v in self.edges],
            "phis": [float(v) for v in self.phis],
            "reps": None if self.reps is None else [float(v) for v in self.reps],
            "seed": self.seed,
            "iterations": self.iterations,
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "Binner":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"binner JSON is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)

    @classmethod
    def from_dict(cls, payload: dict) -> "Binner":
        if not isinstance(payload, dict):
            raise DataError("binner JSON must be an object")
        unknown = set(payload) - set(_BINNER_JSON_FIELDS)
        if unknown:
            raise DataError(f"unknown binner fields: {sorted(unknown)}")
        missing = set(_BINNER_JSON_FIELDS) - set(payload)
        if missing:
            raise DataError(f"missing binner fields: {sorted(missing)}")
        return cls(
            edges=np.asarray(payload["edges"], dtype=np.float64),
            phis=np.asarray(payload["phis"], dtype=np.float64),
            reps=None
            if payload["reps"] is None
            else np.asarray(payload["reps"], dtype=np.float64),
            method=payload["method"],
            iterations=int(payload["iterations"]),
            seed=payload["seed"],
        )

    def to_dict(self) -> dict:
        return json.loads(self.to_json())


def quantize(binner, lam):
    """Bin index of each logit; values exactly on an edge go right."""
    edges = binner.edges if isinstance(binner, Binner) else np.asarray(binner)
    return np.searchsorted(edges, np.asarray(lam, dtype=np.float64), side="right")


def apply_binner(binner: Binner, lam):
    """Map logits to their bin's probability representative."""
    if binner.reps is None:
        raise FitError("binner has no representatives; call set_representatives")
    return binner.reps[quantize(binner, lam)]


def fit_eq_size(n_bins: int):
    """Interior edges splitting the probability axis into equal widths.

    Edges sit at logit(i / M), so they are antisymmetric around 0; the
    mirrored construction keeps that antisymmetry exact in floats.
    """
    if n_bins < 2:
        raise DataError(f"n_bins must be >= 2, got {n_bins}")
    probs = np.arange(1, n_bins) / n_bins
    edges = np.log(probs) - np.log1p(-probs)
    return (edges - edges[::-1]) / 2.0


def fit_eq_mass(cal_set: BinaryCalibrationSet, n_bins: int):
    """Interior edges at the empirical logit quantiles i / M."""
    if n_bins < 2:
        raise DataError(f"n_bins must be >= 2, got {n_bins}")
    if len(cal_set) < n_bins:
        raise FitError(f"need at least {n_bins} samples, got {len(cal_set)}")
    edges = np.quantile(cal_set.logits, np.arange(1, n_bins) / n_bins)
    if np.any(np.diff(edges) <= 0):
        raise FitError(
            "degenerate quantile edges (too many tied logits for eq_mass)"
        )
    return edges


def imax_update_edges(phis, scale: float = 1.0, bias: float = 0.0):
    """Closed-form edge update from strictly increasing phi levels."""
    phis = np.asarray(phis, dtype=np.float64)
    if phis.ndim != 1 or phis.shape[0] < 2:
        raise FitError("need at least two phi levels")
    if np.any(np.diff(phis) <= 0):
        raise FitError("phis must be strictly increasing")
    return kernels.edges_from_phis(phis, scale, bias)


def _midpoint_phis(edges, scale, bias):
    """Strictly increasing in-bin proxies: interior midpoints, outer bins
    extrapolated by the adjacent interior width (1.0 when none exists)."""
    edges = np.asarray(edges, dtype=np.float64)
    if edges.size == 0:
        raise FitError("cannot place proxy phis without edges")
    if edges.size == 1:
        w_lo = w_hi = 1.0
    else:
        w_lo = edges[1] - edges[0]
        w_hi = edges[-1] - edges[-2]
    mids = np.concatenate(
        [[edges[0] - w_lo / 2.0], (edges[:-1] + edges[1:]) / 2.0, [edges[-1] + w_hi / 2.0]]
    )
    return scale * (mids + bias)


def imax_update_phis(
    cal_set: BinaryCalibrationSet,
    edges,
    scale: float = 1.0,
    bias: float = 0.0,
    prev_phis=None,
):
    """Closed-form phi update: per-bin log-ratio of sigmoid sums.

    Empty bins keep their previous phi when prev_phis is given; otherwise
    they fall back to the bin's midpoint proxy so a standalone call still
    returns a strictly increasing vector.
    """
    edges = np.asarray(edges, dtype=np.float64)
    n_bins = edges.shape[0] + 1
    t = scale * (cal_set.logits + bias)
    bin_idx = np.searchsorted(edges, cal_set.logits, side="right")
    sum_pos = np.bincount(bin_idx, weights=expit(t), minlength=n_bins)
    sum_neg = np.bincount(bin_idx, weights=expit(-t), minlength=n_bins)
    occupied = np.bincount(bin_idx, minlength=n_bins) > 0

    if prev_phis is not None:
        fallback = np.asarray(prev_phis, dtype=np.float64)
        if fallback.shape[0] != n_bins:
            raise FitError("prev_phis length must match bin count")
    elif occupied.all():
        fallback = np.zeros(n_bins)
    else:
        fallback = _midpoint_phis(edges, scale, bias)
    phis = np.where(
        occupied,
        np.log(np.where(occupied, sum_pos, 1.0))
        - np.log(np.where(occupied, sum_neg, 1.0)),
        fallback,
    )
    return phis


def surrogate_loss(cal_set: BinaryCalibrationSet, edges, phis) -> float:
    """Label NLL of the stepwise sigmoid model: mean -log sigma((2y-1) phi)."""
    phis = np.asarray(phis, dtype=np.float64)
    per_bin = phis[quantize(np.asarray(edges), cal_set.logits)]
    signs = 2.0 * cal_set.targets - 1.0
    return float(np.mean(np.logaddexp(0.0, -signs * per_bin)))


def weighted_surrogate_loss(
    cal_set: BinaryCalibrationSet, edges, phis, scale: float = 1.0, bias: float = 0.0
) -> float:
    """Sigmoid-model weighted NLL, the objective the alternating updates
    monotonically decrease (labels enter via sigmoid(t) pseudo-weights)."""
    phis = np.asarray(phis, dtype=np.float64)
    per_bin = phis[quantize(np.asarray(edges), cal_set.logits)]
    t = scale * (cal_set.logits + bias)
    loss = expit(t) * np.logaddexp(0.0, -per_bin) + expit(-t) * np.logaddexp(
        0.0, per_bin
    )
    return float(np.mean(loss))


def _binary_entropy(p):
    return -(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p))


def _jsd_to(p, h, q, hq):
    """Jensen-Shannon divergence rows between Bernoulli(q[i]) and every
    Bernoulli(p[j]); JSD(p, q) = H((p+q)/2) - (H(p)+H(q))/2, nats."""
    mid = (p[None, :] + q[:, None]) / 2.0
    out = _binary_entropy(mid) - (h[None, :] + hq[:, None]) / 2.0
    return np.maximum(out, 0.0)


def _seed_phis(t_sorted, n_bins, rng):
    """Greedy k-means++-style seeding of phi levels on the transformed logits.

    Distances are Jensen-Shannon divergences between Bernoulli(sigmoid(t))
    and Bernoulli(sigmoid(center)) in place of squared Euclidean ones.
    Each step draws 2 + floor(log M) candidates proportional to the current
    divergence-to-nearest-center potential and keeps the candidate that
    shrinks the total potential the most. Returns the chosen t values sorted
    ascending.
    """
    p = expit(t_sorted)
    h = _binary_entropy(p)
    n = t_sorted.shape[0]
    n_trials = 2 + int(np.log(n_bins))

    chosen = np.empty(n_bins, dtype=np.float64)
    first = int(rng.integers(n))
    chosen[0] = t_sorted[first]
    dist = _jsd_to(p, h, p[first : first + 1], h[first : first + 1])[0]
    pot = float(dist.sum())

    for j in range(1, n_bins):
        if pot <= 0.0:
            raise FitError(
                f"fewer than {n_bins} distinct logit values; cannot seed bins"
            )
        draws = rng.random(n_trials) * pot
        cand_ids = np.searchsorted(np.cumsum(dist), draws)
        np.clip(cand_ids, None, n - 1, out=cand_ids)
        cand_dist = np.minimum(dist, _jsd_to(p, h, p[cand_ids], h[cand_ids]))
        cand_pot = cand_dist.sum(axis=1)
        best = int(np.argmin(cand_pot))
        chosen[j] = t_sorted[cand_ids[best]]
        dist = cand_dist[best]
        pot = float(cand_pot[best])

    phis = np.sort(chosen)
    if np.any(np.diff(phis) <= 0):
        raise FitError("seeding produced duplicate phi levels")
    return phis


def fit_imax(
    cal_set: BinaryCalibrationSet, config: ImaxConfig | None = None, init_edges=None
) -> Binner:
    """Iteratively fit bin edges that maximize label information.

    Alternates the closed-form edge update (loss-indifference points between
    adjacent phi levels) with the closed-form phi update (per-bin log-ratio
    of sigmoid sums), starting from seeded phi levels or, when init_edges is
    given, from the phi levels those edges induce. Stops after the phi
    update of the first pair whose maximum edge movement falls below the
    tolerance, or after max_iterations pairs.
    """
    cfg = config if config is not None else ImaxConfig()
    n = len(cal_set)
    if n < cfg.n_bins:
        raise FitError(f"need at least {cfg.n_bins} samples, got {n}")
    if np.ptp(cal_set.logits) == 0.0:
        raise FitError("degenerate calibration set: all logits identical")
    if cal_set.targets.min() == cal_set.targets.max():
        warnings.warn("calibration set contains a single label", stacklevel=2)

    order = np.argsort(cal_set.logits, kind="stable")
    lam = cal_set.logits[order]
    is_pos = cal_set.targets[order].astype(np.float64)
    t = cfg.scale * (lam + cfg.bias)

    if init_edges is not None:
        init_phis = imax_update_phis(cal_set, init_edges, cfg.scale, cfg.bias)
        if np.any(np.diff(init_phis) <= 0):
            raise FitError("init_edges induce non-increasing phi levels")
    else:
        rng = np.random.default_rng(cfg.seed)
        init_phis = _seed_phis(t, cfg.n_bins, rng)

    try:
        edges, phis, loss, hard_loss, n_pairs, empties = kernels.alternate(
            lam,
            expit(t),
            expit(-t),
            is_pos,
            init_phis,
            cfg.scale,
            cfg.bias,
            cfg.max_iterations,
            cfg.tolerance,
        )
    except ValueError as exc:
        raise FitError(str(exc)) from exc

    return Binner(
        edges=edges,
        phis=phis,
        reps=None,
        method=METHOD_IMAX,
        iterations=n_pairs,
        seed=cfg.seed,
        diagnostics=FitTrace(
            loss=loss,
            hard_loss=hard_loss,
            empty_bin_events=empties,
            init_phis=init_phis,
        ),
    )


def binner_from_edges(
    edges, method: str, cal_set: BinaryCalibrationSet | None = None, seed=None
) -> Binner:
    """Wrap fixed edges (eq_size / eq_mass) into a Binner.

    Baseline binners carry midpoint-proxy phi levels: only the empty-bin
    representative fallback ever reads them, and midpoints keep the
    strictly-increasing invariant without depending on the data.
    """
    edges = np.asarray(edges, dtype=np.float64)
    return Binner(
        edges=edges,
        phis=_midpoint_phis(edges, 1.0, 0.0),
        reps=None,
        method=method,
        iterations=0,
        seed=seed,
    )


def set_representatives(
    binner: Binner,
    cal_set: BinaryCalibrationSet,
    strategy: str = REP_EMPIRICAL_FREQ,
    scaler=None,
    clamp: bool = True,
) -> Binner:
    """Assign per-bin probability representatives from a calibration set.

    empirical_freq uses the in-bin positive fraction, raw_prob_mean the
    in-bin mean of sigmoid(lam), scaled_prob_mean the in-bin mean of
    sigmoid(scaler(lam)). Empty interior bins fall back to the sigmoid of
    the bin midpoint, empty outer bins to the sigmoid of their phi level.
    By default representatives are clamped to [PROB_EPS, 1 - PROB_EPS] so
    downstream NLL stays finite; clamp=False keeps pure-bin frequencies at
    exactly 0 or 1, which is what makes training-split calibration error
    vanish identically.
    """
    if strategy not in REP_STRATEGIES:
        raise DataError(f"unknown representative strategy {strategy!r}")
    m = binner.n_bins
    bin_idx = quantize(binner, cal_set.logits)
    counts = np.bincount(bin_idx, minlength=m).astype(np.float64)

    if strategy == REP_EMPIRICAL_FREQ:
        mass = np.bincount(
            bin_idx, weights=cal_set.targets.astype(np.float64), minlength=m
        )
    elif strategy == REP_RAW_PROB_MEAN:
        mass = np.bincount(bin_idx, weights=expit(cal_set.logits), minlength=m)
    else:
        if scaler is None:
            raise DataError("scaled_prob_mean needs a fitted scaler")
        from .scaling import apply_scaler

        mass = np.bincount(
            bin_idx, weights=expit(apply_scaler(scaler, cal_set.logits)), minlength=m
        )

    occupied = counts > 0
    reps = np.where(occupied, mass / np.where(occupied, counts, 1.0), np.nan)
    if not np.all(occupied):
        fallback = expit(binner.phis)
        if m > 2:
            interior_mid = (binner.edges[:-1] + binner.edges[1:]) / 2.0
            fallback[1:-1] = expit(interior_mid)
        reps = np.where(occupied, reps, fallback)
    if clamp:
        reps = np.clip(reps, PROB_EPS, 1.0 - PROB_EPS)

    return Binner(
        edges=binner.edges,
        phis=binner.phis,
        reps=reps,
        method=binner.method,
        iterations=binner.iterations,
        seed=binner.seed,
        diagnostics=binner.diagnostics,
    )


def fit_binner(
    cal_set: BinaryCalibrationSet,
    method: str,
    config: ImaxConfig | None = None,
    strategy: str = REP_EMPIRICAL_FREQ,
    scaler=None,
) -> Binner:
    """Fit edges by method, then attach representatives. Convenience wrapper."""
    cfg = config if config is not None else ImaxConfig()
    if method == METHOD_EQ_SIZE:
        binner = binner_from_edges(fit_eq_size(cfg.n_bins), method, seed=cfg.seed)
    elif method == METHOD_EQ_MASS:
        binner = binner_from_edges(
            fit_eq_mass(cal_set, cfg.n_bins), method, seed=cfg.seed
        )
    elif method == METHOD_IMAX:
        binner = fit_imax(cal_set, cfg)
    else:
        raise DataError(f"unknown binning method {method!r}")
    return set_representatives(binner, cal_set, strategy, scaler=scaler)
