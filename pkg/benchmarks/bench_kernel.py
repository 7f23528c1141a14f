"""Compare the compiled brute-force kernel against the numpy fallback.

Usage: python benchmarks/bench_kernel.py [n]
"""

import sys
import time

from pcsp import core
from pcsp import _kernel_py
from pcsp.core import make_ham, Predicate, PredicatePair, Template
from pcsp.generate import planted_instance

try:
    from pcsp import _kernel

    impls = [("compiled", _kernel), ("numpy", _kernel_py)]
except ImportError:
    impls = [("numpy", _kernel_py)]


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    tmpl = Template(
        (
            PredicatePair(make_ham(3, {1}), make_ham(3, {1, 2})),
            PredicatePair(make_ham(4, {2, 3, 4}), make_ham(4, {1, 2, 3, 4})),
        )
    )
    inst, _ = planted_instance(tmpl, n, 3 * n, 0.1, seed=0)
    args = core._kernel_inputs(inst, "weak")
    print(f"n={n} vars, m={inst.num_constraints} constraints, 2^n = {1 << n} assignments")
    results = {}
    for name, impl in impls:
        t0 = time.perf_counter()
        out = impl.search_best(1 << n, inst.num_constraints, *args)
        dt = time.perf_counter() - t0
        results[name] = (out, dt)
        print(f"  {name:9s} {dt:8.3f}s  best={out}")
    if len(results) == 2:
        (a, ta), (b, tb) = results["compiled"], results["numpy"]
        assert tuple(a) == tuple(b), "kernels disagree"
        print(f"  speedup: {tb / ta:.1f}x")


if __name__ == "__main__":
    main()
