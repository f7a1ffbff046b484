"""Persistable multi-class calibrator: grouping plus per-group calibrators.

A bundle records how the K classes were grouped and, per group, either a
Binner (discrete calibrator) or a Scaler (parametric one). Applying a
bundle maps each class's one-vs-rest logit through its group's calibrator
and never renormalizes the resulting rows.

The JSON format is strict: version "1", unknown fields rejected, floats
serialized with shortest round-trip formatting so a refit with the same
seed is byte-identical.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .binning import (
    METHOD_EQ_MASS,
    METHOD_EQ_SIZE,
    METHOD_IMAX,
    REP_EMPIRICAL_FREQ,
    REP_SCALED_PROB_MEAN,
    Binner,
    ImaxConfig,
    fit_binner,
    set_representatives,
    fit_imax,
)
from .data import (
    PROBABILITIES,
    RAW_LOGITS,
    ClassGrouping,
    PredictionMatrix,
    as_probabilities,
    group_all,
    group_by_prior,
    group_singletons,
    logit_of_prob,
    merge_sets,
    ovr_decompose,
)
from .errors import DataError, FitError
from .scaling import (
    KIND_PLATT,
    KIND_TEMPERATURE,
    Scaler,
    apply_scaler,
    fit_platt,
    fit_temperature,
)

BUNDLE_VERSION = "1"
STRATEGY_CW = "cw"
STRATEGY_SCW = "scw"

METHOD_TEMPERATURE = "temperature"
METHOD_PLATT = "platt"
METHOD_IMAX_WITH_SCALER = "imax_with_scaler"
FIT_METHODS = (
    METHOD_EQ_SIZE,
    METHOD_EQ_MASS,
    METHOD_IMAX,
    METHOD_TEMPERATURE,
    METHOD_PLATT,
    METHOD_IMAX_WITH_SCALER,
)

_BUNDLE_FIELDS = (
    "version",
    "strategy",
    "n_classes",
    "input_kind",
    "grouping",
    "calibrators",
    "provenance",
)
_GROUPING_FIELDS = ("mode", "groups")
_CALIBRATOR_FIELDS = ("classes", "binner", "scaler")


@dataclass
class GroupCalibrator:
    classes: tuple
    binner: Binner | None = None
    scaler: Scaler | None = None

    def __post_init__(self):
        self.classes = tuple(int(c) for c in self.classes)
        if (self.binner is None) == (self.scaler is None):
            raise DataError("group calibrator needs exactly one of binner/scaler")


@dataclass
class CalibratorBundle:
    strategy: str
    n_classes: int
    input_kind: str
    grouping: ClassGrouping
    calibrators: list
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.strategy not in (STRATEGY_CW, STRATEGY_SCW):
            raise DataError(f"unknown strategy {self.strategy!r}")
        if self.input_kind not in (RAW_LOGITS, PROBABILITIES):
            raise DataError(f"unknown input kind {self.input_kind!r}")
        covered = sorted(c for cal in self.calibrators for c in cal.classes)
        if covered != list(range(self.n_classes)):
            raise DataError("calibrators must cover every class exactly once")

    def calibrator_of(self, class_k: int) -> GroupCalibrator:
        for cal in self.calibrators:
            if class_k in cal.classes:
                return cal
        raise DataError(f"class {class_k} has no calibrator")

    def has_binners(self) -> bool:
        return any(cal.binner is not None for cal in self.calibrators)

    def to_json(self) -> str:
        payload = {
            "version": BUNDLE_VERSION,
            "strategy": self.strategy,
            "n_classes": self.n_classes,
            "input_kind": self.input_kind,
            "grouping": {
                "mode": self.grouping.mode,
                "groups": [list(g) for g in self.grouping.groups],
            },
            "calibrators": [
                {
                    "classes": list(cal.classes),
                    "binner": None if cal.binner is None else cal.binner.to_dict(),
                    "scaler": None if cal.scaler is None else cal.scaler.to_dict(),
                }
                for cal in self.calibrators
            ],
            "provenance": self.provenance,
        }
        return json.dumps(payload, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CalibratorBundle":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DataError(f"bundle is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise DataError("bundle JSON must be an object")
        unknown = set(payload) - set(_BUNDLE_FIELDS)
        if unknown:
            raise DataError(f"unknown bundle fields: {sorted(unknown)}")
        missing = set(_BUNDLE_FIELDS) - set(payload)
        if missing:
            raise DataError(f"missing bundle fields: {sorted(missing)}")
        if payload["version"] != BUNDLE_VERSION:
            raise DataError(
                f"unsupported bundle version {payload['version']!r}"
                f" (expected {BUNDLE_VERSION!r})"
            )
        grouping_payload = payload["grouping"]
        if not isinstance(grouping_payload, dict) or set(grouping_payload) != set(
            _GROUPING_FIELDS
        ):
            raise DataError("bundle grouping must have exactly mode and groups")
        grouping = ClassGrouping(
            groups=tuple(tuple(g) for g in grouping_payload["groups"]),
            mode=grouping_payload["mode"],
            n_classes=int(payload["n_classes"]),
        )
        calibrators = []
        for cal in payload["calibrators"]:
            if not isinstance(cal, dict):
                raise DataError("calibrator entries must be objects")
            unknown = set(cal) - set(_CALIBRATOR_FIELDS)
            if unknown:
                raise DataError(f"unknown calibrator fields: {sorted(unknown)}")
            missing = set(_CALIBRATOR_FIELDS) - set(cal)
            if missing:
                raise DataError(f"missing calibrator fields: {sorted(missing)}")
            calibrators.append(
                GroupCalibrator(
                    classes=tuple(cal["classes"]),
                    binner=None
                    if cal["binner"] is None
                    else Binner.from_dict(cal["binner"]),
                    scaler=None
                    if cal["scaler"] is None
                    else Scaler.from_dict(cal["scaler"]),
                )
            )
        provenance = payload["provenance"]
        if not isinstance(provenance, dict):
            raise DataError("bundle provenance must be an object")
        return cls(
            strategy=payload["strategy"],
            n_classes=int(payload["n_classes"]),
            input_kind=payload["input_kind"],
            grouping=grouping,
            calibrators=calibrators,
            provenance=provenance,
        )


def _group_set(data: PredictionMatrix, classes):
    return merge_sets([ovr_decompose(data, k) for k in classes])


def resolve_grouping(
    data: PredictionMatrix, strategy: str, groups_spec=None
) -> ClassGrouping:
    """Grouping for the fit: cw means singletons; scw defaults to one group,
    an int selects prior-quantile blocks, a list gives explicit groups."""
    if strategy == STRATEGY_CW:
        if groups_spec is not None:
            raise DataError("cw strategy fits one calibrator per class; no groups")
        return group_singletons(data.n_classes)
    if groups_spec is None:
        return group_all(data.n_classes)
    if isinstance(groups_spec, int):
        return group_by_prior(data, groups_spec)
    return ClassGrouping(
        groups=tuple(tuple(g) for g in groups_spec), n_classes=data.n_classes
    )


def fit_bundle(
    data: PredictionMatrix,
    method: str,
    strategy: str = STRATEGY_SCW,
    groups_spec=None,
    config: ImaxConfig | None = None,
    rep_strategy: str = REP_EMPIRICAL_FREQ,
    scaler_kind: str | None = None,
) -> CalibratorBundle:
    """Fit a complete bundle on a calibration split."""
    if method not in FIT_METHODS:
        raise DataError(f"unknown method {method!r}")
    cfg = config if config is not None else ImaxConfig()

    if method == METHOD_TEMPERATURE:
        if strategy == STRATEGY_CW:
            raise DataError("temperature scaling is fitted on all classes jointly")
        scaler = fit_temperature(data)
        grouping = group_all(data.n_classes)
        calibrators = [GroupCalibrator(classes=grouping.groups[0], scaler=scaler)]
        provenance = {"seed": cfg.seed, "method": method, "n_fit_samples": data.n_samples}
        return CalibratorBundle(
            strategy=STRATEGY_SCW,
            n_classes=data.n_classes,
            input_kind=data.kind,
            grouping=grouping,
            calibrators=calibrators,
            provenance=provenance,
        )

    if method == METHOD_PLATT:
        if strategy == STRATEGY_CW:
            raise DataError("platt scaling is fitted on the merged shared set only")
        grouping = resolve_grouping(data, STRATEGY_SCW, groups_spec)
        calibrators = [
            GroupCalibrator(
                classes=g, scaler=fit_platt(_group_set(data, g), shared=True)
            )
            for g in grouping.groups
        ]
        provenance = {"seed": cfg.seed, "method": method, "n_fit_samples": data.n_samples}
        return CalibratorBundle(
            strategy=STRATEGY_SCW,
            n_classes=data.n_classes,
            input_kind=data.kind,
            grouping=grouping,
            calibrators=calibrators,
            provenance=provenance,
        )

    grouping = resolve_grouping(data, strategy, groups_spec)

    shared_scaler = None
    if method == METHOD_IMAX_WITH_SCALER:
        if scaler_kind == KIND_TEMPERATURE:
            shared_scaler = fit_temperature(data)
        elif scaler_kind == KIND_PLATT:
            shared_scaler = fit_platt(
                _group_set(data, range(data.n_classes)), shared=True
            )
        else:
            raise DataError("imax_with_scaler needs --scaler temperature or platt")
        rep_strategy = REP_SCALED_PROB_MEAN

    calibrators = []
    for g in grouping.groups:
        cal_set = _group_set(data, g)
        if method == METHOD_IMAX_WITH_SCALER:
            binner = fit_imax(cal_set, cfg)
            binner = set_representatives(
                binner, cal_set, REP_SCALED_PROB_MEAN, scaler=shared_scaler
            )
        else:
            binner = fit_binner(cal_set, method, cfg, rep_strategy)
        calibrators.append(GroupCalibrator(classes=g, binner=binner))

    provenance = {
        "seed": cfg.seed,
        "method": method,
        "n_bins": cfg.n_bins,
        "rep_strategy": rep_strategy,
        "n_fit_samples": data.n_samples,
    }
    if shared_scaler is not None:
        provenance["scaler"] = shared_scaler.to_dict()
    return CalibratorBundle(
        strategy=strategy,
        n_classes=data.n_classes,
        input_kind=data.kind,
        grouping=grouping,
        calibrators=calibrators,
        provenance=provenance,
    )


def apply_bundle(bundle: CalibratorBundle, scores, kind: str) -> np.ndarray:
    """Per-class calibrated probabilities, rows not renormalized."""
    probs = as_probabilities(scores, kind)
    n, k = probs.shape
    if k != bundle.n_classes:
        raise DataError(
            f"bundle was fitted for {bundle.n_classes} classes, scores have {k}"
        )
    out = np.empty_like(probs)
    for cal in bundle.calibrators:
        for c in cal.classes:
            lam = logit_of_prob(probs[:, c])
            if cal.binner is not None:
                if cal.binner.reps is None:
                    raise FitError("bundle binner has no representatives")
                out[:, c] = cal.binner.reps[
                    np.searchsorted(cal.binner.edges, lam, side="right")
                ]
            else:
                out[:, c] = expit(apply_scaler(cal.scaler, lam))
    return out
