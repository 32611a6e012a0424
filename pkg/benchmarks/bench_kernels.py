"""Throughput comparison: compiled batch kernels vs the numpy fallback.

Run with ``python benchmarks/bench_kernels.py [n_pairs]``. Both backends
evaluate identical formulas; the compiled loops fuse the per-pair work and
skip the intermediate arrays the numpy implementation materializes.
"""

import sys
import time

import numpy as np

from rotsense import kernels

try:
    from rotsense import _kernels as compiled
except ImportError:
    compiled = None


def bench(label, fn, *args, repeats=5):
    fn(*args)  # warm up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return label, min(times)


def main():
    n = int(float(sys.argv[1])) if len(sys.argv) > 1 else 2_000_000
    rng = np.random.Generator(np.random.Philox(12345))
    q = kernels.random_unit_quats(rng, 2 * n)
    q1, q2 = np.ascontiguousarray(q[:n]), np.ascontiguousarray(q[n:])
    s1 = np.ascontiguousarray(kernels.quat_to_exp_batch(q1))
    s2 = np.ascontiguousarray(kernels.quat_to_exp_batch(q2))

    cases = [
        ("dist_exp", kernels.np_dist_exp_batch, (s1, s2), "dist_exp_batch"),
        ("dist_quat", kernels.np_dist_quat_batch, (q1, q2), "dist_quat_batch"),
        ("ratio_exp", kernels.np_ratio_exp_batch, (s1, s2), "ratio_exp_batch"),
        ("ratio_quat", kernels.np_ratio_quat_batch, (q1, q2), "ratio_quat_batch"),
    ]

    print(f"{n} pairs per call, best of 5")
    print(f"{'kernel':<12} {'numpy':>10} {'compiled':>10} {'speedup':>8}")
    for name, np_fn, args, ext_name in cases:
        _, t_np = bench(name, np_fn, *args)
        if compiled is None:
            print(f"{name:<12} {t_np:>9.3f}s {'n/a':>10} {'n/a':>8}")
            continue
        ext_fn = getattr(compiled, ext_name)
        _, t_ext = bench(name, ext_fn, *args)
        a, b = np_fn(*args), ext_fn(*args)
        mask = ~np.isnan(a)
        assert np.allclose(a[mask], b[mask], rtol=1e-12, atol=1e-12)
        print(f"{name:<12} {t_np:>9.3f}s {t_ext:>9.3f}s {t_np / t_ext:>7.1f}x")
    if compiled is None:
        print("compiled extension not built; showing numpy backend only")


if __name__ == "__main__":
    main()
