"""KDE-based mutual-information upper bound for binary calibration sets.

The bound is I(y; lam) computed from Gaussian kernel density estimates of
the two class-conditional logit densities: no quantizer can carry more
label information than the continuous logit does, so the bound calibrates
how much of the available information a binner's empirical MI captures.
"""

from dataclasses import dataclass

import numpy as np

from .data import BinaryCalibrationSet
from .errors import DataError
from .metrics import mi_of_quantizer

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))
# exp(-0.5 t^2) underflows to exactly 0.0 past |t| ~ 38.6, so a +/- 39 h
# window around each query point reproduces the full sum bit-for-bit.
_KERNEL_WINDOW = 39.0
_GRID_POINTS = 4096
_GRID_MARGIN = 5.0
_DENSITY_FLOOR = 1e-300


@dataclass
class Kde1D:
    """Gaussian KDE with a fixed bandwidth; samples kept sorted."""

    samples: np.ndarray
    bandwidth: float
    rule: str = "scott"

    def __post_init__(self):
        self.samples = np.sort(np.asarray(self.samples, dtype=np.float64))
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise DataError("KDE needs at least two samples")
        if not np.all(np.isfinite(self.samples)):
            raise DataError("KDE samples must be finite")
        if not self.bandwidth > 0:
            raise DataError("KDE bandwidth must be positive")


def kde_fit(samples, bandwidth=None) -> Kde1D:
    """Fit a Gaussian KDE; Scott's rule sigma * n^(-1/5) unless overridden.

    The sample standard deviation uses ddof=1. All-identical samples have
    no scale and are rejected.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if bandwidth is not None:
        return Kde1D(samples=samples, bandwidth=float(bandwidth), rule="fixed")
    if samples.size < 2:
        raise DataError("KDE needs at least two samples")
    sigma = float(np.std(samples, ddof=1))
    if sigma <= 0:
        raise DataError("KDE needs at least two distinct samples")
    return Kde1D(samples=samples, bandwidth=sigma * samples.size ** (-0.2))


def kde_density(kde: Kde1D, x):
    """Exact mixture-of-Gaussians density at the query points.

    Queries are processed in sorted chunks against the sample window within
    +/- 39 bandwidths, where the kernel is representable; outside it the
    kernel underflows to zero, so the windowing loses nothing.
    """
    x = np.asarray(x, dtype=np.float64)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    out = np.zeros_like(xs)
    h = kde.bandwidth
    samples = kde.samples
    norm = 1.0 / (samples.size * h * _SQRT_2PI)

    chunk = 256
    for start in range(0, xs.size, chunk):
        q = xs[start : start + chunk]
        lo = np.searchsorted(samples, q[0] - _KERNEL_WINDOW * h, side="left")
        hi = np.searchsorted(samples, q[-1] + _KERNEL_WINDOW * h, side="right")
        if lo >= hi:
            continue
        window = samples[lo:hi]
        # Keep the (chunk x window) temporaries bounded.
        block = max(1, int(4_000_000 / max(q.size, 1)))
        acc = np.zeros(q.size)
        for wstart in range(0, window.size, block):
            z = (q[:, None] - window[None, wstart : wstart + block]) / h
            acc += np.exp(-0.5 * z * z).sum(axis=1)
        out[start : start + chunk] = acc * norm

    result = np.empty_like(out)
    result[order] = out
    return float(result[0]) if scalar else result


def mi_upper_bound(
    kde_pos: Kde1D, kde_neg: Kde1D, prior: float, unit: str = "nats"
) -> float:
    """I(y; lam) from the two class-conditional KDEs, by trapezoid quadrature.

    The grid spans [min - 5h, max + 5h] of the pooled samples with
    h = max of the two bandwidths, 4096 uniform points. Grid points where
    the mixture density underflows below 1e-300 are skipped.
    """
    if not 0.0 < prior < 1.0:
        raise DataError("prior must lie strictly inside (0, 1)")
    if unit not in ("nats", "bits"):
        raise DataError(f"unknown unit {unit!r}")
    h = max(kde_pos.bandwidth, kde_neg.bandwidth)
    lo = min(kde_pos.samples[0], kde_neg.samples[0]) - _GRID_MARGIN * h
    hi = max(kde_pos.samples[-1], kde_neg.samples[-1]) + _GRID_MARGIN * h
    grid = np.linspace(lo, hi, _GRID_POINTS)

    p1 = kde_density(kde_pos, grid)
    p0 = kde_density(kde_neg, grid)
    mix = prior * p1 + (1.0 - prior) * p0
    ok = mix >= _DENSITY_FLOOR

    integrand = np.zeros_like(grid)
    pos_ok = ok & (p1 > 0)
    neg_ok = ok & (p0 > 0)
    integrand[pos_ok] = prior * p1[pos_ok] * np.log(p1[pos_ok] / mix[pos_ok])
    integrand[neg_ok] += (
        (1.0 - prior) * p0[neg_ok] * np.log(p0[neg_ok] / mix[neg_ok])
    )
    value = float(np.trapezoid(integrand, grid))
    value = max(value, 0.0)
    if unit == "bits":
        value /= float(np.log(2.0))
    return value


def mi_bound_of_set(cal_set: BinaryCalibrationSet, unit: str = "nats") -> float:
    """Convenience wrapper: split a set by target, fit the two KDEs, bound."""
    pos = cal_set.logits[cal_set.targets == 1]
    neg = cal_set.logits[cal_set.targets == 0]
    if pos.size < 2 or neg.size < 2:
        raise DataError("MI bound needs at least two samples of each label")
    prior = float(cal_set.targets.mean())
    return mi_upper_bound(kde_fit(pos), kde_fit(neg), prior, unit)


def mi_report(cal_set: BinaryCalibrationSet, named_binners, unit: str = "nats"):
    """Rows of (name, n_bins, mi, upper_bound, ratio) for fitted binners.

    The bound is computed once on the given set, which should be the set
    the binners were fitted on.
    """
    bound = mi_bound_of_set(cal_set, unit)
    scale = 1.0 if unit == "nats" else 1.0 / float(np.log(2.0))
    rows = []
    for name, binner in named_binners:
        mi = mi_of_quantizer(binner, cal_set) * scale
        ratio = mi / bound if bound > 0 else float("nan")
        rows.append((name, binner.n_bins, mi, bound, ratio))
    return rows


def mi_report_csv(rows, unit: str = "nats") -> str:
    header = f"name,n_bins,mi_{unit},upper_bound_{unit},ratio"
    lines = [header]
    for name, m, mi, bound, ratio in rows:
        lines.append(f"{name},{m},{repr(float(mi))},{repr(float(bound))},{repr(float(ratio))}")
    return "\n".join(lines) + "\n"
