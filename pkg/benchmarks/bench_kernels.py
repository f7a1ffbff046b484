"""Time the alternating-update kernel: compiled extension vs numpy reference.

Feeds both backends the exact inputs fit_imax prepares, so the numbers
reflect the fitting hot loop and nothing else. Run from the repo root:

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np
from scipy.special import expit

from imaxcal import BinaryMixtureSpec, fit_eq_mass, gen_binary_mixture, imax_update_phis
from imaxcal.kernels import get_backend

SHAPES = [(10_000, 15), (100_000, 15), (100_000, 50)]


def kernel_inputs(n, n_bins, seed=0):
    spec = BinaryMixtureSpec(prior=0.01, mu_pos=2.0, mu_neg=-6.0, n=n, seed=seed)
    cal_set, _ = gen_binary_mixture(spec)
    order = np.argsort(cal_set.logits, kind="stable")
    lam = cal_set.logits[order]
    is_pos = cal_set.targets[order].astype(np.float64)
    phis0 = imax_update_phis(cal_set, fit_eq_mass(cal_set, n_bins))
    return lam, expit(lam), expit(-lam), is_pos, phis0, 1.0, 0.0, 200, 1e-10


def best_of(fn, args, repeats):
    timings = []
    for _ in range(repeats):
        started = time.perf_counter()
        fn(*args)
        timings.append(time.perf_counter() - started)
    return min(timings)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=5)
    opts = parser.parse_args()

    python_alternate, _ = get_backend("python")
    try:
        compiled_alternate, _ = get_backend("compiled")
    except ImportError:
        compiled_alternate = None
        print("compiled extension not built; timing the reference backend only")

    header = f"{'n':>8} {'bins':>5} {'python':>12} {'compiled':>12} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for n, n_bins in SHAPES:
        args = kernel_inputs(n, n_bins)
        py = best_of(python_alternate, args, opts.repeats)
        if compiled_alternate is None:
            print(f"{n:>8} {n_bins:>5} {py * 1e3:>10.2f}ms {'-':>12} {'-':>8}")
            continue
        cc = best_of(compiled_alternate, args, opts.repeats)
        edges_py, *_ = python_alternate(*args)
        edges_cc, *_ = compiled_alternate(*args)
        drift = float(np.max(np.abs(edges_py - edges_cc)))
        print(
            f"{n:>8} {n_bins:>5} {py * 1e3:>10.2f}ms {cc * 1e3:>10.2f}ms "
            f"{py / cc:>7.1f}x  (max edge drift {drift:.1e})"
        )


if __name__ == "__main__":
    main()
