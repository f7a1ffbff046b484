"""Batch command-line interface.

Subcommands: fit, apply, eval, synth, mi-report. Files are headerless CSV
(scores: N x K floats; labels: N x 1 integers); calibrators travel as strict
JSON bundles. Exit codes: 0 success, 2 usage error, 3 data error, 4 fit
failure. Diagnostics go to stderr as single-line key=value records.
"""

import json
import sys

import click
import numpy as np

from . import bundle as bundle_mod
from . import info as info_mod
from . import synth as synth_mod
from .binning import ImaxConfig, fit_eq_mass, fit_eq_size, fit_imax, binner_from_edges
from .data import (
    PROBABILITIES,
    RAW_LOGITS,
    PredictionMatrix,
    merge_sets,
    ovr_decompose,
)
from .errors import DataError, FitError
from .metrics import (
    EvalConfig,
    SCHEME_EQ_SIZE,
    SCHEME_EXACT,
    THRESHOLD_CLASS_PRIOR,
    THRESHOLD_HALF,
    THRESHOLD_ONE_OVER_K,
    THRESHOLD_ZERO,
    TIE_CLASS_INDEX,
    TIE_RAW_LOGIT,
    build_report,
)

_KIND_BY_FLAG = {"logits": RAW_LOGITS, "probs": PROBABILITIES}
_TIE_BY_FLAG = {"class-index": TIE_CLASS_INDEX, "raw-logit": TIE_RAW_LOGIT}
_THRESHOLD_NAMES = {
    "zero": THRESHOLD_ZERO,
    "one-over-k": THRESHOLD_ONE_OVER_K,
    "one_over_k": THRESHOLD_ONE_OVER_K,
    "prior": THRESHOLD_CLASS_PRIOR,
    "class-prior": THRESHOLD_CLASS_PRIOR,
    "class_prior": THRESHOLD_CLASS_PRIOR,
    "half": THRESHOLD_HALF,
}
_SCHEME_NAMES = {
    "eq-size": "eq_size",
    "eq_size": "eq_size",
    "eq-mass": "eq_mass",
    "eq_mass": "eq_mass",
    "kmeans": "kmeans",
    "imax": "imax_eval",
    "imax-eval": "imax_eval",
    "imax_eval": "imax_eval",
    "exact": "exact_grouping",
    "exact-grouping": "exact_grouping",
    "exact_grouping": "exact_grouping",
}


def diag(**kv):
    """Single-line key=value diagnostic on stderr."""
    parts = []
    for key, value in kv.items():
        text = str(value).replace("\n", "; ").replace('"', "'")
        parts.append(f'{key}="{text}"' if " " in text or text == "" else f"{key}={text}")
    print(" ".join(parts), file=sys.stderr)


def _read_matrix(path) -> np.ndarray:
    try:
        arr = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise DataError(f"parse failure in {path}: {exc}") from exc
    if arr.size == 0:
        raise DataError(f"{path} is empty")
    return arr


def _read_labels(path, n_expected=None) -> np.ndarray:
    arr = _read_matrix(path)
    if arr.shape[1] != 1:
        raise DataError(f"labels file {path} must have one column")
    col = arr[:, 0]
    labels = col.astype(np.int64)
    if np.any(labels != col):
        raise DataError(f"labels in {path} must be integers")
    if n_expected is not None and labels.shape[0] != n_expected:
        raise DataError(
            f"row count mismatch: {labels.shape[0]} labels vs {n_expected} score rows"
        )
    return labels


def _write_matrix(path, matrix):
    matrix = np.asarray(matrix, dtype=np.float64)
    with open(path, "w") as fh:
        for row in matrix:
            fh.write(",".join(repr(float(v)) for v in row))
            fh.write("\n")


def _write_labels(path, labels):
    with open(path, "w") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")


def _parse_multi(values, cast, what):
    """Flatten repeatable, comma-separated flag values."""
    out = []
    for value in values:
        for token in str(value).split(","):
            token = token.strip()
            if not token:
                continue
            try:
                out.append(cast(token))
            except ValueError as exc:
                raise click.UsageError(f"bad {what} value {token!r}") from exc
    return out


def _parse_thresholds(values):
    out = []
    for token in _parse_multi(values, str, "threshold"):
        if token in _THRESHOLD_NAMES:
            out.append(_THRESHOLD_NAMES[token])
        else:
            try:
                out.append(float(token))
            except ValueError:
                raise click.UsageError(f"unknown threshold {token!r}") from None
    return out or [THRESHOLD_CLASS_PRIOR]


def _parse_groups(text):
    if text is None:
        return None
    try:
        return int(text)
    except ValueError:
        pass
    groups = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, _, hi = part.partition("-")
            try:
                groups.append(tuple(range(int(lo), int(hi) + 1)))
            except ValueError:
                raise click.UsageError(f"bad group range {part!r}") from None
        else:
            try:
                groups.append((int(part),))
            except ValueError:
                raise click.UsageError(f"bad group index {part!r}") from None
    if not groups:
        raise click.UsageError(f"empty group spec {text!r}")
    return groups


def _scheme_of(flag):
    if flag == "auto":
        return None
    if flag not in _SCHEME_NAMES:
        raise click.UsageError(f"unknown eval scheme {flag!r}")
    return _SCHEME_NAMES[flag]


@click.group()
def cli():
    """Post-hoc confidence calibration: binning, scaling, evaluation."""


@cli.command("fit")
@click.argument("scores_csv", type=click.Path())
@click.argument("labels_csv", type=click.Path())
@click.option("-o", "--out", required=True, type=click.Path(), help="Bundle JSON path.")
@click.option(
    "--method",
    default="imax",
    help="eq_size | eq_mass | imax | temperature | platt | imax_with_scaler",
)
@click.option("--bins", default=15, show_default=True, help="Number of bins M.")
@click.option(
    "--strategy",
    default="scw",
    type=click.Choice(["cw", "scw"]),
    show_default=True,
    help="Per-class (cw) or shared (scw) calibrators.",
)
@click.option(
    "--groups",
    default=None,
    help="scw only: group count (prior quantiles) or explicit groups like 0-1,2-4,5-9.",
)
@click.option(
    "--scaler",
    default="none",
    type=click.Choice(["none", "temperature", "platt"]),
    show_default=True,
    help="Scaler for imax_with_scaler representatives.",
)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--input-kind",
    default="logits",
    type=click.Choice(["logits", "probs"]),
    show_default=True,
)
@click.option(
    "--holdout-frac",
    default=0.0,
    show_default=True,
    help="Class-balanced holdout fraction, written next to the bundle.",
)
@click.option("--rep-strategy", default="empirical-freq", show_default=True,
              help="empirical-freq | raw-prob-mean for binning methods.")
def cmd_fit(
    scores_csv,
    labels_csv,
    out,
    method,
    bins,
    strategy,
    groups,
    scaler,
    seed,
    input_kind,
    holdout_frac,
    rep_strategy,
):
    """Fit a calibrator bundle from scores and labels."""
    method = method.replace("-", "_")
    if method not in bundle_mod.FIT_METHODS:
        raise click.UsageError(f"unknown method {method!r}")
    rep = rep_strategy.replace("-", "_")
    if rep not in ("empirical_freq", "raw_prob_mean"):
        raise click.UsageError(f"unknown rep strategy {rep_strategy!r}")
    if not 0.0 <= holdout_frac < 1.0:
        raise click.UsageError("--holdout-frac must lie in [0, 1)")
    if method == "imax" and scaler != "none":
        method = bundle_mod.METHOD_IMAX_WITH_SCALER
    if method == bundle_mod.METHOD_IMAX_WITH_SCALER and scaler == "none":
        raise click.UsageError("imax_with_scaler needs --scaler temperature or platt")

    scores = _read_matrix(scores_csv)
    labels = _read_labels(labels_csv, scores.shape[0])
    data = PredictionMatrix(scores, labels, _KIND_BY_FLAG[input_kind])

    if holdout_frac > 0.0:
        fit_idx, hold_idx = _class_balanced_split(labels, holdout_frac, seed)
        stem = out[:-5] if out.endswith(".json") else out
        _write_matrix(f"{stem}.holdout-scores.csv", scores[hold_idx])
        _write_labels(f"{stem}.holdout-labels.csv", labels[hold_idx])
        diag(
            event="holdout_split",
            fit_n=len(fit_idx),
            holdout_n=len(hold_idx),
            holdout_scores=f"{stem}.holdout-scores.csv",
            holdout_labels=f"{stem}.holdout-labels.csv",
        )
        data = PredictionMatrix(
            scores[fit_idx], labels[fit_idx], _KIND_BY_FLAG[input_kind]
        )

    cfg = ImaxConfig(n_bins=bins, seed=seed)
    fitted = bundle_mod.fit_bundle(
        data,
        method,
        strategy=strategy,
        groups_spec=_parse_groups(groups),
        config=cfg,
        rep_strategy=rep,
        scaler_kind=None if scaler == "none" else scaler,
    )
    with open(out, "w") as fh:
        fh.write(fitted.to_json())
    diag(event="fit", method=method, strategy=fitted.strategy, out=out)


def _class_balanced_split(labels, frac, seed):
    rng = np.random.default_rng(seed)
    fit_idx, hold_idx = [], []
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        n_hold = int(round(frac * idx.size))
        if n_hold >= idx.size:
            n_hold = idx.size - 1
        hold_idx.append(idx[:n_hold])
        fit_idx.append(idx[n_hold:])
    fit_idx = np.sort(np.concatenate(fit_idx))
    hold_idx = np.sort(np.concatenate(hold_idx))
    if fit_idx.size == 0:
        raise DataError("holdout fraction leaves no fit samples")
    return fit_idx, hold_idx


@cli.command("apply")
@click.argument("bundle_json", type=click.Path())
@click.argument("scores_csv", type=click.Path())
@click.option("-o", "--out", required=True, type=click.Path(), help="Calibrated CSV path.")
@click.option(
    "--input-kind",
    default=None,
    type=click.Choice(["logits", "probs"]),
    help="Defaults to the kind the bundle was fitted on.",
)
@click.option(
    "--raw-sidecar",
    default=None,
    type=click.Path(),
    help="Also write the raw scores, for raw-logit tie-break evaluation.",
)
def cmd_apply(bundle_json, scores_csv, out, input_kind, raw_sidecar):
    """Apply a fitted bundle to scores; rows are not renormalized."""
    fitted = _load_bundle(bundle_json)
    scores = _read_matrix(scores_csv)
    kind = fitted.input_kind if input_kind is None else _KIND_BY_FLAG[input_kind]
    calibrated = bundle_mod.apply_bundle(fitted, scores, kind)
    _write_matrix(out, calibrated)
    if raw_sidecar is not None:
        _write_matrix(raw_sidecar, scores)
    diag(event="apply", n=calibrated.shape[0], k=calibrated.shape[1], out=out)


def _load_bundle(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return bundle_mod.CalibratorBundle.from_json(text)


@cli.command("eval")
@click.argument("scores_csv", type=click.Path())
@click.argument("labels_csv", type=click.Path())
@click.option("--bundle", "bundle_json", default=None, type=click.Path(),
              help="Apply this bundle first; scores_csv is then raw scores.")
@click.option("-o", "--out", default=None, type=click.Path(), help="Report JSON path.")
@click.option("--csv", "csv_out", default=None, type=click.Path(), help="Report CSV path.")
@click.option("--eval-scheme", default="auto", show_default=True,
              help="auto | eq_size | eq_mass | kmeans | imax_eval | exact_grouping")
@click.option("--eval-bins", multiple=True, help="Repeatable; default 100.")
@click.option("--cw-threshold", multiple=True,
              help="zero | one-over-k | prior | half | float; repeatable.")
@click.option("--top-k", multiple=True, help="Repeatable; default 1,5.")
@click.option("--bootstrap", default=0, show_default=True, help="Resample count B.")
@click.option("--tie-break", default="class-index",
              type=click.Choice(["class-index", "raw-logit"]), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--input-kind",
    default=None,
    type=click.Choice(["logits", "probs"]),
    help="Kind of scores_csv when applying a bundle (defaults to the bundle's).",
)
@click.option("--raw-scores", default=None, type=click.Path(),
              help="Raw score sidecar for raw-logit tie-break without a bundle.")
def cmd_eval(
    scores_csv,
    labels_csv,
    bundle_json,
    out,
    csv_out,
    eval_scheme,
    eval_bins,
    cw_threshold,
    top_k,
    bootstrap,
    tie_break,
    seed,
    input_kind,
    raw_scores,
):
    """Evaluate calibrated scores (or scores through a bundle)."""
    scheme = _scheme_of(eval_scheme)
    bins_list = _parse_multi(eval_bins, int, "--eval-bins") or [100]
    thresholds = _parse_thresholds(cw_threshold)
    ks = _parse_multi(top_k, int, "--top-k") or [1, 5]
    tie = _TIE_BY_FLAG[tie_break]

    scores = _read_matrix(scores_csv)
    labels = _read_labels(labels_csv, scores.shape[0])

    raw = None
    if bundle_json is not None:
        fitted = _load_bundle(bundle_json)
        kind = fitted.input_kind if input_kind is None else _KIND_BY_FLAG[input_kind]
        calibrated = bundle_mod.apply_bundle(fitted, scores, kind)
        raw = scores
        if scheme is None:
            scheme = SCHEME_EXACT if fitted.has_binners() else SCHEME_EQ_SIZE
    else:
        calibrated = scores
        if calibrated.min() < 0.0 or calibrated.max() > 1.0:
            raise DataError(
                "scores outside [0, 1]; pass --bundle to calibrate raw scores"
            )
        if raw_scores is not None:
            raw = _read_matrix(raw_scores)
        if scheme is None:
            scheme = SCHEME_EQ_SIZE

    if tie == TIE_RAW_LOGIT and raw is None:
        raise DataError("raw-logit tie break needs --bundle or --raw-scores")

    reports = []
    for nb in bins_list:
        cfg = EvalConfig(
            eval_scheme=scheme,
            n_eval_bins=nb,
            cw_thresholds=tuple(thresholds),
            top_k=tuple(ks),
            tie_break=tie,
            bootstrap=bootstrap,
            seed=seed,
        )
        reports.append(build_report(calibrated, labels, cfg, raw_scores=raw))

    for rep in reports:
        if len(reports) > 1:
            click.echo(f"# eval_bins={rep.config.n_eval_bins}")
        click.echo(rep.to_text())
    if out is not None:
        payload = [rep.to_dict() for rep in reports]
        with open(out, "w") as fh:
            json.dump(payload[0] if len(payload) == 1 else payload, fh, indent=2)
            fh.write("\n")
    if csv_out is not None:
        with open(csv_out, "w") as fh:
            for rep in reports:
                fh.write(rep.to_csv())
    for rep in reports:
        for label, res in rep.cw.items():
            if res.zero_kept_classes:
                diag(
                    event="zero_kept_classes",
                    threshold=label,
                    count=res.zero_kept_classes,
                )


@cli.command("synth")
@click.option("--preset", default=None, type=click.Choice(sorted(synth_mod.PRESETS)))
@click.option("--multiclass", is_flag=True, help="Multiclass generator (default: binary mixture).")
@click.option("--k", default=10, show_default=True, help="Multiclass class count.")
@click.option("--tgen", default=1.0, show_default=True, help="Generation temperature.")
@click.option("--prior", default=0.5, show_default=True, help="Binary positive prior.")
@click.option("--mu-pos", default=1.0, show_default=True)
@click.option("--mu-neg", default=-1.0, show_default=True)
@click.option("--sigma-pos", default=1.0, show_default=True)
@click.option("--sigma-neg", default=1.0, show_default=True)
@click.option("--n", default=10_000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out-prefix", required=True, type=click.Path())
def cmd_synth(
    preset,
    multiclass,
    k,
    tgen,
    prior,
    mu_pos,
    mu_neg,
    sigma_pos,
    sigma_neg,
    n,
    seed,
    out_prefix,
):
    """Generate synthetic scores/labels with a ground-truth sidecar."""
    try:
        if preset is not None:
            if multiclass:
                raise click.UsageError("--preset and --multiclass are exclusive")
            params = dict(synth_mod.PRESETS[preset])
            spec = synth_mod.BinaryMixtureSpec(n=n, seed=seed, **params)
            family = "binary"
        elif multiclass:
            family = "multiclass"
            spec = synth_mod.MulticlassSynthSpec(n_classes=k, n=n, t_gen=tgen, seed=seed)
        else:
            family = "binary"
            spec = synth_mod.BinaryMixtureSpec(
                prior=prior,
                mu_pos=mu_pos,
                sigma_pos=sigma_pos,
                mu_neg=mu_neg,
                sigma_neg=sigma_neg,
                n=n,
                seed=seed,
            )
    except DataError as exc:
        # A bad generator spec is a flag problem, not a data-file problem.
        raise click.UsageError(str(exc)) from exc

    if family == "binary":
        cal_set, _ = synth_mod.gen_binary_mixture(spec)
        # Two-column raw logits [0, lam]: softmax gives (1-sigma(lam), sigma(lam)),
        # so class 1's one-vs-rest logit round-trips to lam exactly.
        scores = np.column_stack([np.zeros(len(cal_set)), cal_set.logits])
        labels = cal_set.targets.astype(np.int64)
        sidecar = {
            "spec": spec.to_dict(),
            "analytic": {
                "mi_nats": synth_mod.analytic_mi(spec),
                "posterior": "expit(log_prior_ratio + loglik_pos - loglik_neg)",
            },
        }
    else:
        data = synth_mod.gen_multiclass(spec)
        scores = data.scores
        labels = data.labels
        sidecar = {
            "spec": spec.to_dict(),
            "analytic": {"posterior": "softmax(t_gen * scores)"},
        }

    _write_matrix(f"{out_prefix}-scores.csv", scores)
    _write_labels(f"{out_prefix}-labels.csv", labels)
    with open(f"{out_prefix}-spec.json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    diag(event="synth", family=family, n=len(labels), out_prefix=out_prefix)


@cli.command("mi-report")
@click.argument("scores_csv", type=click.Path())
@click.argument("labels_csv", type=click.Path())
@click.option("--bins", multiple=True, help="Repeatable bin counts; default 2,4,8,16.")
@click.option("--method", "methods", multiple=True,
              help="Repeatable: imax | eq_size | eq_mass; default all three.")
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--input-kind",
    default="logits",
    type=click.Choice(["logits", "probs"]),
    show_default=True,
)
@click.option("-o", "--out", default=None, type=click.Path(), help="CSV path (default stdout).")
def cmd_mi_report(scores_csv, labels_csv, bins, methods, seed, input_kind, out):
    """Empirical binner MI against the KDE upper bound, on the fit set."""
    bins_list = _parse_multi(bins, int, "--bins") or [2, 4, 8, 16]
    method_list = [m.replace("-", "_") for m in _parse_multi(methods, str, "--method")] or [
        "imax",
        "eq_size",
        "eq_mass",
    ]
    for m in method_list:
        if m not in ("imax", "eq_size", "eq_mass"):
            raise click.UsageError(f"unknown method {m!r}")

    scores = _read_matrix(scores_csv)
    labels = _read_labels(labels_csv, scores.shape[0])
    data = PredictionMatrix(scores, labels, _KIND_BY_FLAG[input_kind])
    cal_set = merge_sets(
        [ovr_decompose(data, k) for k in range(data.n_classes)]
    )

    named = []
    for m in bins_list:
        for method in method_list:
            cfg = ImaxConfig(n_bins=m, seed=seed)
            if method == "imax":
                binner = fit_imax(cal_set, cfg)
            elif method == "eq_size":
                binner = binner_from_edges(fit_eq_size(m), method, seed=seed)
            else:
                binner = binner_from_edges(
                    fit_eq_mass(cal_set, m), method, seed=seed
                )
            named.append((method, binner))
    rows = info_mod.mi_report(cal_set, named)
    text = info_mod.mi_report_csv(rows)
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w") as fh:
            fh.write(text)
    diag(event="mi_report", set="fit", n=len(cal_set), rows=len(rows))


def _error_line(kind, exc):
    msg = str(exc).replace("\n", "; ").replace('"', "'")
    print(f'error={kind} msg="{msg}"', file=sys.stderr)


def main(argv=None):
    """Console entry point with the documented exit-code mapping."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        _error_line("usage", exc.format_message() if hasattr(exc, "format_message") else exc)
        return 2
    except click.Abort:
        _error_line("usage", "aborted")
        return 2
    except DataError as exc:
        _error_line("data", exc)
        return 3
    except FitError as exc:
        _error_line("fit", exc)
        return 4


if __name__ == "__main__":
    sys.exit(main())
