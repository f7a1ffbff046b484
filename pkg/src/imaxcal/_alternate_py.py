"""Reference implementation of the alternating bin-edge optimization loop.

Pure numpy, semantically identical to the compiled kernel in _alternate_c.pyx.
imaxcal.kernels picks one of the two at import time.

Domain conventions: logits lam are sorted ascending; t = scale * (lam + bias)
is the transformed logit the sigmoid model operates on; phis live in the t
domain while edges live in the lam domain.
"""

import numpy as np


def _softplus(x):
    return np.logaddexp(0.0, x)


def edges_from_phis(phis, scale, bias):
    """Closed-form loss-indifference edges between adjacent phi levels.

    For each adjacent pair the returned edge is the logit where assigning a
    sample to either bin incurs the same model loss, which is

        g_m = (1/scale) * log( (sp(phi_m) - sp(phi_{m-1}))
                             / (sp(-phi_{m-1}) - sp(-phi_m)) ) - bias

    with sp the softplus. Requires strictly increasing phis.
    """
    phis = np.asarray(phis, dtype=np.float64)
    sp_pos = _softplus(phis)
    sp_neg = _softplus(-phis)
    num = sp_pos[1:] - sp_pos[:-1]
    den = sp_neg[:-1] - sp_neg[1:]
    return (np.log(num) - np.log(den)) / scale - bias


def alternate(lam, sig_pos, sig_neg, is_pos, phis0, scale, bias, max_iter, tol):
    """Run the alternating edge/phi updates until movement stalls.

    Parameters
    ----------
    lam : float64 (N,), sorted ascending
    sig_pos, sig_neg : sigmoid(+t) and sigmoid(-t) for t = scale*(lam+bias)
    is_pos : float64 0/1 targets, aligned with lam
    phis0 : float64 (M,), strictly increasing initial phi levels
    scale, bias : sigmoid-model transform parameters
    max_iter : maximum number of (edge update, phi update) pairs
    tol : early stop once the largest edge movement drops below this

    Returns
    -------
    (edges, phis, loss, hard_loss, n_pairs, empty_events)
        loss is the sigmoid-model weighted NLL after each completed pair
        (non-increasing by construction); hard_loss is the label NLL after
        each pair; empty_events counts phi updates skipped on empty bins.
    """
    lam = np.ascontiguousarray(lam, dtype=np.float64)
    phis = np.array(phis0, dtype=np.float64, copy=True)
    n = lam.shape[0]
    m = phis.shape[0]
    if np.any(np.diff(phis) <= 0.0):
        raise ValueError("initial phis not strictly increasing")

    loss = np.empty(max_iter)
    hard_loss = np.empty(max_iter)
    edges = None
    empty_events = 0
    n_pairs = 0

    for it in range(max_iter):
        new_edges = edges_from_phis(phis, scale, bias)
        movement = np.inf if edges is None else float(np.max(np.abs(new_edges - edges)))
        edges = new_edges

        # Half-open bins [g_m, g_{m+1}); a sample exactly on an edge goes right.
        bin_idx = np.searchsorted(edges, lam, side="right")
        counts = np.bincount(bin_idx, minlength=m).astype(np.float64)
        sum_pos = np.bincount(bin_idx, weights=sig_pos, minlength=m)
        sum_neg = np.bincount(bin_idx, weights=sig_neg, minlength=m)
        n_pos = np.bincount(bin_idx, weights=is_pos, minlength=m)

        occupied = counts > 0.0
        empty_events += int(m - np.count_nonzero(occupied))
        phis = np.where(
            occupied,
            np.log(np.where(occupied, sum_pos, 1.0))
            - np.log(np.where(occupied, sum_neg, 1.0)),
            phis,
        )
        if np.any(np.diff(phis) <= 0.0):
            raise ValueError("phi levels lost strict monotonicity mid-iteration")

        sp_pos = _softplus(phis)
        sp_neg = _softplus(-phis)
        loss[it] = float(np.dot(sum_pos, sp_neg) + np.dot(sum_neg, sp_pos)) / n
        hard_loss[it] = (
            float(np.dot(n_pos, sp_neg) + np.dot(counts - n_pos, sp_pos)) / n
        )
        n_pairs = it + 1
        if movement < tol:
            break

    return edges, phis, loss[:n_pairs].copy(), hard_loss[:n_pairs].copy(), n_pairs, empty_events
