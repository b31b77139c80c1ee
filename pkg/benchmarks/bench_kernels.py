#!/usr/bin/env python3
"""Compare the compiled bitset kernels against the pure-Python fallback.

Two workloads: synthetic random relations at several sizes, and the real
consistency pipeline over a corpus file (the kernels sit under every derived
relation there). Run from the repository root:

    python3 benchmarks/bench_kernels.py [corpus/iriw-sc.litmus]
"""

import random
import sys
import time

from immlab.kernels import pure

try:
    from immlab.kernels import _bitrel as compiled
except ImportError:
    compiled = None


def random_rows(rng, n, density):
    rows = []
    for _ in range(n):
        row = 0
        for j in range(n):
            if rng.random() < density:
                row |= 1 << j
        rows.append(row)
    return rows


def bench_backend(backend, cases, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        for n, rows, other in cases:
            backend.transitive_closure(rows, n)
            backend.compose(rows, other, n)
            backend.has_cycle(rows, n)
    return time.perf_counter() - t0


def synthetic():
    rng = random.Random(0)
    print(f"{'n':>5} {'pure':>10} {'cython':>10} {'speedup':>8}")
    for n, repeat in ((8, 4000), (16, 2000), (32, 800), (64, 300), (128, 60)):
        cases = [
            (n, random_rows(rng, n, 0.2), random_rows(rng, n, 0.2))
            for _ in range(5)
        ]
        t_pure = bench_backend(pure, cases, repeat)
        if compiled is None:
            print(f"{n:>5} {t_pure:>9.3f}s {'n/a':>10}")
            continue
        t_comp = bench_backend(compiled, cases, repeat)
        print(f"{n:>5} {t_pure:>9.3f}s {t_comp:>9.3f}s {t_pure / t_comp:>7.2f}x")


def pipeline(path):
    import immlab.kernels as kern
    from immlab.consistency import check_imm, check_imms
    from immlab.enumeration import candidate_executions
    from immlab.program import parse_litmus

    test = parse_litmus(open(path, "rb").read(), path)

    def once():
        t0 = time.perf_counter()
        for cand in candidate_executions(test.program):
            check_imm(cand.execution)
            check_imms(cand.execution)
        return time.perf_counter() - t0

    results = {}
    for backend in filter(None, (compiled, pure)):
        kern.transitive_closure = backend.transitive_closure
        kern.compose = backend.compose
        kern.has_cycle = backend.has_cycle
        once()  # warm-up
        results[backend.NAME] = min(once() for _ in range(3))
    print(f"\nconsistency pipeline on {test.name}:")
    for name, t in results.items():
        print(f"  {name:>7}: {t:.3f}s")
    if len(results) == 2:
        print(f"  speedup: {results['pure'] / results['cython']:.2f}x")


if __name__ == "__main__":
    synthetic()
    pipeline(sys.argv[1] if len(sys.argv) > 1 else "corpus/iriw-sc.litmus")
