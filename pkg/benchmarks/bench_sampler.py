"""Compare the numba and numpy sampling backends.

    python3 benchmarks/bench_sampler.py [--repeat 5]

Both backends read the same uniform stream, so the script also checks that
they return identical samples before timing them.
"""

import argparse
import time

import numpy as np

from lhsig import scheme
from lhsig.sampler import RandomStream, sample_dom, sample_gaussian


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--profile", default="toy16")
    args = ap.parse_args()

    pp = scheme.setup_profile(args.profile)
    pk, sk = scheme.key_gen(pp, RandomStream(b"bench"))
    tau = RandomStream(b"tau").bits(pp.n)
    basis = scheme.tag_basis(sk, pk, tau)
    s = pk.params.V_eff

    cases = {
        "sample_dom(n=4096, s=4)": lambda b: sample_dom(4096, 4.0, RandomStream(b"d"), backend=b),
        f"sample_gaussian(n={pp.n}) x200": lambda b: [
            sample_gaussian(basis, s, np.zeros(pp.n), rng, unchecked=True, backend=b)
            for rng in [RandomStream(b"g")] for _ in range(200)
        ],
    }

    print(f"{'case':34s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        a, b = fn("numpy"), fn("numba")  # also compiles the numba kernels
        same = all(np.array_equal(x, y) for x, y in zip(a, b)) if isinstance(a, list) else np.array_equal(a, b)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        t_np = best_of(lambda: fn("numpy"), args.repeat)
        t_nb = best_of(lambda: fn("numba"), args.repeat)
        print(f"{name:34s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
