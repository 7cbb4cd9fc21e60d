"""Bit-sliced plaintext circuit evaluation: numba kernel vs numpy fallback.

    python benchmarks/bench_kernels.py [--gates 20000] [--instances 4096] [--repeat 5]

The numba path is timed after one warm-up call so compilation is excluded.
Both paths must agree; the script checks that before printing timings.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from tapsplit import kernels
from tapsplit.yao.circuit import random_circuit


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gates", type=int, default=20000)
    ap.add_argument("--instances", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    c = random_circuit(args.gates, 64, 64, 64, rng)
    g = rng.integers(0, 2, (args.instances, len(c.garbler_inputs)), dtype=np.uint8)
    e = rng.integers(0, 2, (args.instances, len(c.evaluator_inputs)), dtype=np.uint8)

    ref = c.evaluate_batch(g, e, use_numba=False)
    print(f"circuit: {c.n_gates} gates, {c.n_wires} wires; {args.instances} instances")
    t_np = best_of(lambda: c.evaluate_batch(g, e, use_numba=False), args.repeat)
    print(f"numpy fallback : {t_np * 1e3:9.2f} ms")
    if not kernels.USE_NUMBA:
        print("numba path     : disabled (TAPSPLIT_NO_NUMBA or NUMBA_DISABLE_JIT set)")
        return
    t0 = time.perf_counter()
    out = c.evaluate_batch(g, e, use_numba=True)
    warm = time.perf_counter() - t0
    if not np.array_equal(out, ref):
        raise SystemExit("numba and numpy paths disagree")
    t_nb = best_of(lambda: c.evaluate_batch(g, e, use_numba=True), args.repeat)
    print(f"numba kernel   : {t_nb * 1e3:9.2f} ms  (first call incl. compile/cache load {warm * 1e3:.1f} ms)")
    print(f"speedup        : {t_np / t_nb:9.1f}x")


if __name__ == "__main__":
    main()
