"""Post-hoc confidence calibration for multi-class classifiers.

Histogram binning fitted to maximize the mutual information between the
quantized score and the label, classic scaling baselines, strict evaluation
metrics, and synthetic generators with known ground truth. Hot loops run in
a compiled extension when it is available; set IMAXCAL_PURE_PYTHON=1 to force
the reference implementation.
"""

from .binning import (
    Binner,
    FitTrace,
    ImaxConfig,
    METHOD_EQ_MASS,
    METHOD_EQ_SIZE,
    METHOD_IMAX,
    REP_EMPIRICAL_FREQ,
    REP_RAW_PROB_MEAN,
    REP_SCALED_PROB_MEAN,
    apply_binner,
    binner_from_edges,
    fit_binner,
    fit_eq_mass,
    fit_eq_size,
    fit_imax,
    imax_update_edges,
    imax_update_phis,
    quantize,
    set_representatives,
    surrogate_loss,
    weighted_surrogate_loss,
)
from .bundle import (
    CalibratorBundle,
    GroupCalibrator,
    STRATEGY_CW,
    STRATEGY_SCW,
    apply_bundle,
    fit_bundle,
    resolve_grouping,
)
from .data import (
    BinaryCalibrationSet,
    ClassGrouping,
    PROBABILITIES,
    PredictionMatrix,
    RAW_LOGITS,
    group_all,
    group_by_prior,
    group_singletons,
    logit_of_prob,
    merge_sets,
    ovr_decompose,
    prob_of_logit,
    softmax,
)
from .errors import DataError, FitError, ImaxcalError
from .info import Kde1D, kde_density, kde_fit, mi_bound_of_set, mi_report, mi_upper_bound
from .kernels import BACKEND
from .metrics import (
    CwEceResult,
    EvalConfig,
    MetricReport,
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
from .scaling import (
    KIND_PLATT,
    KIND_TEMPERATURE,
    Scaler,
    apply_scaler,
    bin_with_scaler,
    fit_platt,
    fit_temperature,
)
from .synth import (
    BinaryMixtureSpec,
    MulticlassSynthSpec,
    PRESETS,
    analytic_mi,
    analytic_posterior,
    analytic_sigmoid_model,
    gen_binary_mixture,
    gen_multiclass,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BinaryCalibrationSet",
    "BinaryMixtureSpec",
    "Binner",
    "CalibratorBundle",
    "ClassGrouping",
    "CwEceResult",
    "DataError",
    "EvalConfig",
    "FitError",
    "FitTrace",
    "GroupCalibrator",
    "ImaxConfig",
    "ImaxcalError",
    "Kde1D",
    "KIND_PLATT",
    "KIND_TEMPERATURE",
    "METHOD_EQ_MASS",
    "METHOD_EQ_SIZE",
    "METHOD_IMAX",
    "MetricReport",
    "MulticlassSynthSpec",
    "PRESETS",
    "PROBABILITIES",
    "PredictionMatrix",
    "RAW_LOGITS",
    "REP_EMPIRICAL_FREQ",
    "REP_RAW_PROB_MEAN",
    "REP_SCALED_PROB_MEAN",
    "STRATEGY_CW",
    "STRATEGY_SCW",
    "Scaler",
    "accuracy_topk",
    "analytic_mi",
    "analytic_posterior",
    "analytic_sigmoid_model",
    "apply_binner",
    "apply_bundle",
    "apply_scaler",
    "bin_with_scaler",
    "binner_from_edges",
    "bootstrap_metric",
    "brier",
    "build_report",
    "cw_ece",
    "eval_bin_edges",
    "fit_binner",
    "fit_bundle",
    "fit_eq_mass",
    "fit_eq_size",
    "fit_imax",
    "fit_platt",
    "fit_temperature",
    "gen_binary_mixture",
    "gen_multiclass",
    "group_all",
    "group_by_prior",
    "group_singletons",
    "imax_update_edges",
    "imax_update_phis",
    "kde_density",
    "kde_fit",
    "logit_of_prob",
    "merge_sets",
    "mi_bound_of_set",
    "mi_from_joint",
    "mi_of_quantizer",
    "mi_report",
    "mi_upper_bound",
    "nll",
    "ovr_decompose",
    "prob_of_logit",
    "quantize",
    "ranked_classes",
    "resolve_grouping",
    "set_representatives",
    "softmax",
    "surrogate_loss",
    "top1_ece",
    "weighted_surrogate_loss",
]
