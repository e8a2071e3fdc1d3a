"""Compare the compiled and numpy Green's-function kernels.

    python3 benchmarks/bench_kernels.py --sizes 256 1024 2048 --repeat 3
"""
import argparse
import time

import numpy as np

from scatter_crypt import _pykernels

try:
    from scatter_crypt import _ckernels
except ImportError:
    _ckernels = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 2048])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; nothing to compare")
        return 1
    rng = np.random.default_rng(args.seed)
    k = 2 * np.pi
    print(f"{'kernel':<20}{'n':>7}{'python s':>12}{'cython s':>12}{'speedup':>10}{'max rel diff':>15}")
    for n in args.sizes:
        pts = rng.uniform(0, 20, size=(n, 3))
        obs = rng.uniform(0, 20, size=(n, 3)) + [0, 30, 0]
        tau = rng.uniform(-11, -3, size=n).astype(np.complex128)
        cases = {
            "green_matrix": (lambda m: m.green_matrix(pts, obs, k, args.threads)),
            "foldy_lax_operator": (lambda m: m.foldy_lax_operator(pts, tau, k, args.threads)),
        }
        for name, call in cases.items():
            tp, a = _best(lambda: call(_pykernels), args.repeat)
            tc, b = _best(lambda: call(_ckernels), args.repeat)
            rel = float(np.max(np.abs(a - b)) / np.max(np.abs(a)))
            print(f"{name:<20}{n:>7}{tp:>12.4f}{tc:>12.4f}{tp / tc:>10.2f}{rel:>15.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
