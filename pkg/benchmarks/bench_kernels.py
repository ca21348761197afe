"""Numba kernels versus their numpy twins.

Runs each statevector kernel on a random state and prints the median
wall time per call for both backends, plus an end-to-end 13-qubit pricing
circuit simulation.  Usage: ``python3 benchmarks/bench_kernels.py [--qubits 16]``.
"""
import argparse
import time

import numpy as np

from cqgm import _kernels as K
from cqgm.distributions import GbmParams, gbm_ensemble
from cqgm.pricing import PricingJob, build_pricing_circuit
from cqgm.statevector import run


def timeit(fn, repeat=7, number=5):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return float(np.median(times))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--qubits", type=int, default=16)
    ap.add_argument("--batch", type=int, default=200)
    args = ap.parse_args()
    if K.HAVE_NUMBA:
        kernel_table(args)
    else:
        print("numba unavailable or disabled; skipping the per-kernel comparison")
    end_to_end()


def kernel_table(args):
    n = args.qubits
    rng = np.random.default_rng(0)
    state = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    state /= np.linalg.norm(state)
    batch = rng.standard_normal((args.batch, 32)) + 0j
    perm = rng.permutation(1 << n)
    diag = rng.choice((-1.0, 1.0), 1 << n)
    probs = np.abs(state) ** 2
    c, s = np.cos(0.3), np.sin(0.3)

    cases = {
        "1q rotation": lambda impl: impl["1q"](state, 3, c, -s, s, c),
        "controlled 1q": lambda impl: impl["1q"](state, 3, c, -s, s, c, 0b11, 0b01),
        f"1q on {args.batch}x5q batch": lambda impl: impl["1q"](batch, 2, c, -s, s, c),
        "diagonal": lambda impl: impl["diag"](state, diag),
        "permutation": lambda impl: impl["perm"](state, perm),
        "marginal": lambda impl: impl["marg"](probs, 4, 5),
    }
    impls = {
        "numba": {"1q": K.apply_1q_numba, "diag": K.apply_diagonal_numba,
                  "perm": K.apply_permutation_numba, "marg": K.marginal_numba},
        "numpy": {"1q": K.apply_1q_numpy, "diag": K.apply_diagonal_numpy,
                  "perm": K.apply_permutation_numpy, "marg": K.marginal_numpy},
    }
    print(f"{'kernel':28s} {'numba [us]':>12s} {'numpy [us]':>12s} {'speedup':>8s}")
    for name, case in cases.items():
        case(impls["numba"])  # compile
        tb = timeit(lambda: case(impls["numba"]))
        tn = timeit(lambda: case(impls["numpy"]))
        print(f"{name:28s} {tb * 1e6:12.1f} {tn * 1e6:12.1f} {tn / tb:8.2f}")


def end_to_end():
    op = build_pricing_circuit(PricingJob(gbm_ensemble(GbmParams())))
    run(op.a_circuit)
    t = timeit(lambda: run(op.a_circuit), repeat=3, number=1)
    print(f"13-qubit pricing circuit ({len(op.a_circuit.ops)} ops) with {K.backend_name()} backend: {t * 1e3:.1f} ms")


if __name__ == "__main__":
    main()
