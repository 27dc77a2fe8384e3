"""Micro-benchmark: pure-numpy kernels against their numba twins.

Runs each hot kernel at two representative shapes (the full-size default
architecture and the small synthetic-benchmark one) and prints the
median per-call time for both backends plus the speedup. The numba
timings exclude JIT compilation: every kernel is called once for warmup
before the clock starts.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import statistics
import time

import numpy as np

from czsl.kernels import numpy_backend

try:
    from czsl.kernels import numba_backend
except ImportError:
    numba_backend = None


def bench(fn, args, repeats, inner=10):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        for _ in range(inner):
            fn(*args)
        times.append((time.perf_counter() - start) / inner)
    return statistics.median(times)


def make_cases(batch, d_in, d_out, rng):
    x = rng.normal(size=(batch, d_in))
    w = rng.normal(size=(d_out, d_in)) / np.sqrt(d_in)
    b = rng.normal(size=d_out)
    dout = rng.normal(size=(batch, d_out))
    logits = rng.normal(size=(batch, d_out))
    labels = rng.integers(0, d_out, batch)
    mu = rng.normal(size=(batch, d_in))
    logvar = rng.normal(size=(batch, d_in)) * 0.1
    noise = rng.normal(size=(batch, d_in))
    p = rng.normal(size=(d_out, d_in))
    g = rng.normal(size=(d_out, d_in))
    m = np.zeros_like(p)
    v = np.zeros_like(p)
    shape = "%dx%d->%d" % (batch, d_in, d_out)
    return [
        ("affine_relu %s" % shape, "affine_relu", (x, w, b)),
        ("linear_backward %s" % shape, "linear_backward", (dout, x, w)),
        ("softmax_xent %dx%d" % (batch, d_out), "softmax_cross_entropy",
         (logits, labels)),
        ("gaussian_kl %dx%d" % (batch, d_in), "gaussian_kl", (mu, logvar)),
        ("reparameterize %dx%d" % (batch, d_in), "reparameterize",
         (mu, logvar, noise)),
        ("adam_update %dx%d" % (d_out, d_in), "adam_update",
         (p, g, m, v, 3, 1e-3, 0.9, 0.999, 1e-8)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=30,
                        help="timing repetitions per kernel (median reported)")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    cases = (make_cases(64, 512, 512, rng)      # full-size default layers
             + make_cases(64, 64, 64, rng))     # synthetic benchmark layers

    if numba_backend is None:
        print("numba backend unavailable; timing numpy only")

    header = "%-28s %12s %12s %9s" % ("kernel", "numpy (us)", "numba (us)",
                                      "speedup")
    print(header)
    print("-" * len(header))
    for label, name, call_args in cases:
        np_fn = getattr(numpy_backend, name)
        t_np = bench(np_fn, call_args, args.repeats)
        if numba_backend is None:
            print("%-28s %12.1f %12s %9s" % (label, t_np * 1e6, "-", "-"))
            continue
        nb_fn = getattr(numba_backend, name)
        nb_fn(*call_args)  # trigger compilation outside the clock
        t_nb = bench(nb_fn, call_args, args.repeats)
        print("%-28s %12.1f %12.1f %8.2fx"
              % (label, t_np * 1e6, t_nb * 1e6, t_np / t_nb))


if __name__ == "__main__":
    main()
