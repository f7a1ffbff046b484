# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of _alternate_py.alternate.

Same contract and accumulation order (per-bin sums accumulate in sample
order) so the two backends agree to float roundoff.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, exp, fabs, log, log1p

cnp.import_array()


cdef inline double softplus(double x) noexcept nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


def edges_from_phis(phis_in, double scale, double bias):
    """Closed-form loss-indifference edges; see the numpy twin for the math."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phis = np.ascontiguousarray(
        phis_in, dtype=np.float64
    )
    cdef Py_ssize_t m = phis.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] edges = np.empty(m - 1, dtype=np.float64)
    cdef Py_ssize_t i
    cdef double num, den
    for i in range(m - 1):
        num = softplus(phis[i + 1]) - softplus(phis[i])
        den = softplus(-phis[i]) - softplus(-phis[i + 1])
        edges[i] = (log(num) - log(den)) / scale - bias
    return edges


def alternate(lam_in, sig_pos_in, sig_neg_in, is_pos_in, phis0, double scale,
              double bias, int max_iter, double tol):
    """Alternating edge/phi optimization; contract documented in the numpy twin."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam = np.ascontiguousarray(
        lam_in, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sig_pos = np.ascontiguousarray(
        sig_pos_in, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sig_neg = np.ascontiguousarray(
        sig_neg_in, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] is_pos = np.ascontiguousarray(
        is_pos_in, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] phis = np.array(
        phis0, dtype=np.float64, copy=True
    )
    cdef Py_ssize_t n = lam.shape[0]
    cdef Py_ssize_t m = phis.shape[0]
    cdef Py_ssize_t i, j, it

    for j in range(m - 1):
        if phis[j + 1] <= phis[j]:
            raise ValueError("initial phis not strictly increasing")

    cdef cnp.ndarray[cnp.float64_t, ndim=1] edges = np.empty(m - 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] loss = np.empty(max_iter, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hard_loss = np.empty(
        max_iter, dtype=np.float64
    )
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sum_pos = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sum_neg = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] n_pos = np.empty(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] counts = np.empty(m, dtype=np.float64)

    cdef double num, den, g, movement, d, sp_p, sp_n, acc_soft, acc_hard
    cdef Py_ssize_t n_pairs = 0
    cdef long empty_events = 0
    cdef bint first = True
    cdef Py_ssize_t lo, hi

    with nogil:
        for it in range(max_iter):
            movement = 0.0
            for j in range(m - 1):
                num = softplus(phis[j + 1]) - softplus(phis[j])
                den = softplus(-phis[j]) - softplus(-phis[j + 1])
                g = (log(num) - log(den)) / scale - bias
                if first:
                    movement = INFINITY
                else:
                    d = fabs(g - edges[j])
                    if d > movement:
                        movement = d
                edges[j] = g
            first = False

            for j in range(m):
                sum_pos[j] = 0.0
                sum_neg[j] = 0.0
                n_pos[j] = 0.0
                counts[j] = 0.0
            # lam is sorted: walk the edge pointer forward once per pass.
            # A sample exactly on an edge belongs to the right bin.
            j = 0
            for i in range(n):
                while j < m - 1 and lam[i] >= edges[j]:
                    j += 1
                sum_pos[j] += sig_pos[i]
                sum_neg[j] += sig_neg[i]
                n_pos[j] += is_pos[i]
                counts[j] += 1.0

            for j in range(m):
                if counts[j] > 0.0:
                    phis[j] = log(sum_pos[j]) - log(sum_neg[j])
                else:
                    empty_events += 1
            for j in range(m - 1):
                if phis[j + 1] <= phis[j]:
                    with gil:
                        raise ValueError(
                            "phi levels lost strict monotonicity mid-iteration"
                        )

            acc_soft = 0.0
            acc_hard = 0.0
            for j in range(m):
                sp_p = softplus(phis[j])
                sp_n = softplus(-phis[j])
                acc_soft += sum_pos[j] * sp_n + sum_neg[j] * sp_p
                acc_hard += n_pos[j] * sp_n + (counts[j] - n_pos[j]) * sp_p
            loss[it] = acc_soft / n
            hard_loss[it] = acc_hard / n
            n_pairs = it + 1
            if movement < tol:
                break

    return (
        edges,
        phis,
        loss[:n_pairs].copy(),
        hard_loss[:n_pairs].copy(),
        int(n_pairs),
        int(empty_events),
    )
