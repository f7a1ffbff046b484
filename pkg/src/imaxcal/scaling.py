"""Parametric logit scalers: temperature and Platt.

Scalers act on one-vs-rest logits (lam -> lam / T, lam -> a * lam + b) and
double as the smoothing stage of the hybrid binner, where bin
representatives are means of scaled probabilities instead of raw ones.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import expit, logsumexp, softmax as _softmax_rows

from .binning import REP_SCALED_PROB_MEAN, Binner, ImaxConfig, fit_imax, set_representatives
from .data import RAW_LOGITS, BinaryCalibrationSet, PredictionMatrix
from .errors import DataError, FitError

KIND_TEMPERATURE = "temperature"
KIND_PLATT = "platt"

TEMPERATURE_BOUNDS = (1e-2, 1e2)
_PLATT_GRAD_TOL = 1e-8
_PLATT_MAX_ITER = 200


@dataclass
class Scaler:
    """Fitted scaler parameters; kind selects the transform."""

    kind: str
    temperature: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        if self.kind == KIND_TEMPERATURE:
            if self.temperature is None or not np.isfinite(self.temperature):
                raise FitError("temperature scaler needs a finite temperature")
            if self.temperature <= 0:
                raise FitError("temperature must be positive")
        elif self.kind == KIND_PLATT:
            if self.a is None or self.b is None:
                raise FitError("platt scaler needs both a and b")
            if not (np.isfinite(self.a) and np.isfinite(self.b)):
                raise FitError("platt parameters must be finite")
        else:
            raise DataError(f"unknown scaler kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == KIND_TEMPERATURE:
            return {"kind": self.kind, "temperature": float(self.temperature)}
        return {"kind": self.kind, "a": float(self.a), "b": float(self.b)}

    @classmethod
    def from_dict(cls, payload: dict) -> "Scaler":
        if not isinstance(payload, dict) or "kind" not in payload:
            raise DataError("scaler JSON must be an object with a kind")
        kind = payload["kind"]
        if kind == KIND_TEMPERATURE:
            allowed = {"kind", "temperature"}
        elif kind == KIND_PLATT:
            allowed = {"kind", "a", "b"}
        else:
            raise DataError(f"unknown scaler kind {kind!r}")
        if set(payload) != allowed:
            off = sorted(set(payload) ^ allowed)
            raise DataError(f"scaler fields do not match {kind!r}: {off}")
        if kind == KIND_TEMPERATURE:
            return cls(kind=kind, temperature=float(payload["temperature"]))
        return cls(kind=kind, a=float(payload["a"]), b=float(payload["b"]))


def apply_scaler(scaler: Scaler, lam):
    """Transform logits: lam / T for temperature, a * lam + b for Platt."""
    lam = np.asarray(lam, dtype=np.float64)
    if scaler.kind == KIND_TEMPERATURE:
        return lam / scaler.temperature
    return scaler.a * lam + scaler.b


def _nll_of_inverse_temp(u, scores, labels):
    scaled = u * scores
    return float(
        np.mean(logsumexp(scaled, axis=1) - scaled[np.arange(len(labels)), labels])
    )


def fit_temperature(data: PredictionMatrix) -> Scaler:
    """Fit T by minimizing the multiclass softmax NLL of scores / T.

    Bounded 1-D search (scipy's bounded scalar minimizer) over the inverse
    temperature, whose NLL is convex, followed by a couple of Newton polish
    steps. T is confined to [1e-2, 1e2].
    """
    if data.kind != RAW_LOGITS:
        raise DataError("temperature scaling needs raw logits, not probabilities")
    if data.n_samples < 2:
        raise FitError("temperature scaling needs at least two samples")
    scores = data.scores - data.scores.max(axis=1, keepdims=True)
    labels = data.labels
    lo, hi = TEMPERATURE_BOUNDS

    res = minimize_scalar(
        _nll_of_inverse_temp,
        args=(scores, labels),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-8},
    )
    u = float(res.x)

    # Newton polish on the inverse temperature (analytic first two derivatives).
    z_true = scores[np.arange(len(labels)), labels]
    for _ in range(3):
        p = _softmax_rows(u * scores, axis=1)
        s1 = np.sum(p * scores, axis=1)
        s2 = np.sum(p * scores**2, axis=1)
        grad = float(np.mean(s1 - z_true))
        curv = float(np.mean(s2 - s1**2))
        if curv <= 0:
            break
        step = grad / curv
        u_new = min(max(u - step, lo), hi)
        if abs(u_new - u) < 1e-12:
            u = u_new
            break
        u = u_new

    temperature = min(max(1.0 / u, lo), hi)
    return Scaler(kind=KIND_TEMPERATURE, temperature=temperature)


def _platt_objective(a, b, lam, targets):
    t = a * lam + b
    return float(np.mean(np.logaddexp(0.0, t) - targets * t))


def fit_platt(cal_set: BinaryCalibrationSet, shared: bool = False) -> Scaler:
    """Fit (a, b) by damped Newton on the binary NLL of sigmoid(a lam + b).

    The objective is convex; iteration stops when the gradient 2-norm drops
    below 1e-8. `shared` is bookkeeping only (records that the set was the
    merged shared-class-wise pool); the optimization is identical.
    """
    lam = cal_set.logits
    targets = cal_set.targets.astype(np.float64)
    if cal_set.targets.min() == cal_set.targets.max():
        raise FitError("platt scaling needs both labels present")
    if np.ptp(lam) == 0.0:
        raise FitError("degenerate calibration set: all logits identical")

    a, b = 1.0, 0.0
    obj = _platt_objective(a, b, lam, targets)
    for _ in range(_PLATT_MAX_ITER):
        t = a * lam + b
        p = expit(t)
        resid = p - targets
        grad = np.array([np.mean(resid * lam), np.mean(resid)])
        if float(np.linalg.norm(grad)) < _PLATT_GRAD_TOL:
            break
        w = p * (1.0 - p)
        hess = np.array(
            [
                [np.mean(w * lam * lam), np.mean(w * lam)],
                [np.mean(w * lam), np.mean(w)],
            ]
        )
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError as exc:
            raise FitError("platt Newton step failed: singular Hessian") from exc

        # Halve the step until the (convex) objective stops increasing.
        scale = 1.0
        for _ in range(40):
            cand = _platt_objective(a - scale * step[0], b - scale * step[1], lam, targets)
            if cand <= obj:
                break
            scale *= 0.5
        else:
            raise FitError("platt line search failed to make progress")
        a -= scale * step[0]
        b -= scale * step[1]
        obj = cand
    else:
        raise FitError("platt Newton did not converge")
    _ = shared
    return Scaler(kind=KIND_PLATT, a=float(a), b=float(b))


def bin_with_scaler(
    cal_set: BinaryCalibrationSet, config: ImaxConfig, scaler: Scaler
) -> Binner:
    """Hybrid calibrator: edges and phis from the iterative fit on raw
    logits, representatives from per-bin means of scaled probabilities."""
    binner = fit_imax(cal_set, config)
    return set_representatives(binner, cal_set, REP_SCALED_PROB_MEAN, scaler=scaler)
