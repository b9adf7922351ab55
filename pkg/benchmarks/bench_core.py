"""Time the certificate integrals on the compiled and pure-Python cores.

    python3 benchmarks/bench_core.py [--points 200] [--repeat 3]

One sample is a dissipation evaluation plus a velocity-modulus evaluation at a
single xi, the unit of work of a certificate sweep.
"""

import argparse
import math
import time

from ssqg import _kernels_py
from ssqg.moduli import ModulusFamily
from ssqg.symbols import Symbol

try:
    from ssqg import _kernels
except ImportError:
    _kernels = None


def sample_points(delta, n):
    # offset so that no sample lands on the branch point
    return [delta * 10 ** (-6 + 12 * (i + 0.5) / n) for i in range(n)]


def time_core(module, args, xis, repeat):
    core = module.ModulusCore(*args)
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        for xi in xis:
            core.dissipation(xi, 1e6, 1e-10, 0.0, 2000)
            core.velocity(xi, 1e6, 1e-10, 0.0, 2000)
        best = min(best, time.perf_counter() - t0)
    return best / len(xis)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    ns = ap.parse_args(argv)

    print(f"{'symbol':<26}{'B':>8}{'python [ms]':>14}{'compiled [ms]':>15}{'speedup':>10}")
    for symbol in (Symbol(), Symbol("loglog-power", 0.5)):
        fam = ModulusFamily.auto(symbol, 20.0)
        for B in (1.0, 1e6):
            inst = fam.instance(B)
            args = (_kernels_py.KIND_FAMILY, symbol.code, symbol.beta, B, fam.kappa,
                    fam.gamma, inst.delta)
            xis = sample_points(inst.delta, ns.points)
            tp = time_core(_kernels_py, args, xis, ns.repeat)
            if _kernels is None:
                print(f"{symbol.label():<26}{B:>8g}{tp * 1e3:>14.3f}{'n/a':>15}{'n/a':>10}")
                continue
            tc = time_core(_kernels, args, xis, ns.repeat)
            print(f"{symbol.label():<26}{B:>8g}{tp * 1e3:>14.3f}{tc * 1e3:>15.4f}{tp / tc:>10.1f}")
    if _kernels is None:
        print("compiled core not built; install with a C compiler and Cython available")


if __name__ == "__main__":
    main()
