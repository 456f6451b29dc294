"""Time the numba kernels against their numpy (einsum) versions.

Run with ``python benchmarks/bench_kernels.py``.  Reports per-call kernel
times at chi = 2, 4, 8 and the end-to-end time of a TFI energy (n=64),
checking that both backends agree.
"""
import argparse
import time

import numpy as np

from spectraltn import _kernels as K
from spectraltn.graded import WireSpace, random_parity_unitary
from spectraltn.models import ModelSpec, build_model, tfi_terms
from spectraltn.engine import energy


def best_of(fn, reps):
    fn()  # warm up (numba compiles on first call)
    out = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return min(out)


def random_density(chi, k, rng):
    d = chi**k
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    r = a @ a.conj().T
    return (r / np.trace(r)).reshape((chi,) * (2 * k))


def bench_kernels(reps):
    rng = np.random.default_rng(0)
    print(f"{'kernel':<14}{'chi':>4}{'numba [ms]':>13}{'numpy [ms]':>13}{'speedup':>9}")
    for s in (1, 2, 3):
        chi = 1 << s
        g = random_parity_unitary(WireSpace(s), 2, rng).reshape((chi,) * 4)
        g2 = random_parity_unitary(WireSpace(s), 2, rng).reshape((chi,) * 4)
        r1, r2 = random_density(chi, 1, rng), random_density(chi, 1, rng)
        ra, rb = random_density(chi, 2, rng), random_density(chi, 2, rng)
        pv = K.parity_of(chi)
        cases = [
            ("descend", lambda: K.descend(g, g, r1, r2)),
            ("pair-descend", lambda: K.pair_descend(g, g, g2, g2, ra, rb, pv)),
        ]
        for name, fn in cases:
            t = {}
            res = {}
            K.NUMBA_PAIR_MAX_CHI = 64  # time the loops even where dispatch would skip them
            for b in ("numba", "numpy"):
                K.set_backend(b)
                t[b] = best_of(fn, reps)
                res[b] = fn()
            K.set_backend("numba")
            K.NUMBA_PAIR_MAX_CHI = 4
            assert np.allclose(res["numba"], res["numpy"], atol=1e-12), name
            print(f"{name:<14}{chi:>4}{1e3 * t['numba']:>13.3f}{1e3 * t['numpy']:>13.3f}{t['numpy'] / t['numba']:>9.1f}")


def bench_energy(n, reps):
    _, st = build_model(ModelSpec("TFI", (n,), h=1.0))
    terms = tfi_terms(n, 1.0)
    t, e = {}, {}
    for b in ("numba", "numpy"):
        K.set_backend(b)
        t[b] = best_of(lambda: energy(st, terms), reps)
        e[b] = energy(st, terms)
    K.set_backend("numba")
    assert abs(e["numba"] - e["numpy"]) < 1e-10
    print(f"TFI energy n={n}: numba {t['numba']:.3f} s, numpy {t['numpy']:.3f} s, speedup {t['numpy'] / t['numba']:.1f}")


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--n", type=int, default=64)
    args = p.parse_args()
    if not K.HAVE_NUMBA:
        raise SystemExit("numba unavailable (or disabled by SPECTRALTN_DISABLE_NUMBA); nothing to compare")
    bench_kernels(args.reps)
    bench_energy(args.n, max(1, args.reps // 2))


if __name__ == "__main__":
    main()
