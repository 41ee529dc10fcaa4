"""Compare the compiled and the numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, the speedup
of each backend over the numpy one and the largest absolute difference of
its output from the numpy result.
"""
import argparse
import time

import numpy as np

from reverbphase.kernels import backends


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    fs = 16000.0
    h = rng.standard_normal((64, 8000))
    freqs = np.linspace(10.0, 7000.0, 48)
    yield "dtft 64x8000 @48f", lambda m: m.dtft(h, freqs, 1 / fs)
    decays = np.full(48, 1e-4)
    yield "dtft damped", lambda m: m.dtft(h, freqs, 1 / fs, decays)
    bands = rng.standard_normal((16, 16, 8000))
    gains = rng.uniform(0.5, 1.5, 16)
    dec = rng.uniform(1e-4, 1e-3, 16)
    yield "modulated_sum 16x16x8000", lambda m: m.modulated_sum(bands, gains, dec)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    mods = backends()
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'backend':8s} {'best [ms]':>10s} {'speedup':>8s} {'max|diff|':>10s}")
    for name, call in cases(rng):
        ref_t, ref = _best(lambda: call(mods["python"]), args.repeat)
        for key, mod in mods.items():
            t, out = (ref_t, ref) if key == "python" else _best(lambda: call(mod), args.repeat)
            diff = float(np.max(np.abs(np.asarray(out) - ref)))
            print(f"{name:28s} {key:8s} {1e3 * t:10.2f} {ref_t / t:8.2f} {diff:10.2e}")


if __name__ == "__main__":
    main()
