"""Compiled versus pure-Python kernels.

Times each hot kernel with both backends on identical inputs and checks
that the results agree.  An end-to-end section builds and iterates a map
in a subprocess per backend (the backend is chosen at import).

    python3 benchmarks/bench_kernels.py [--quick]
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from hotm._kernels import _pykernels

try:
    from hotm._kernels import _ckernels
except ImportError:  # extension not built
    _ckernels = None

from hotm.da import DaContext
from hotm.dynamics import Formulation, OdeSystem
from hotm.elements import ElementSet, scale_values
from hotm.harness import case_model, initial_state
from hotm.integrator import A_ROWS, B8, C, DB


def _time(fn, number):
    return min(timeit.repeat(fn, number=number, repeat=5)) / number


def _cases():
    ctx = DaContext(5, 6)
    rng = np.random.default_rng(0)
    a = rng.standard_normal(ctx.size)
    b = rng.standard_normal(ctx.size)
    coef = np.ascontiguousarray(rng.standard_normal((7, ctx.size)))
    x = rng.uniform(-0.01, 0.01, 6)

    model = case_model(6).scaled()
    ecc = initial_state(6, ElementSet.ECCHILL)
    fast = OdeSystem(ElementSet.ECCHILL, model, "fast")
    y_fast = [float(v) for v in fast.pack(scale_values(ecc.set, ecc.values, model.scaling), 0.0)]
    mee = initial_state(1, ElementSet.MEE)
    m1 = case_model(1).scaled()
    y_mee = [float(v) for v in scale_values(mee.set, mee.values, m1.scaling)]
    args_fast = fast._kernel_args
    args_mee = OdeSystem(ElementSet.MEE, m1, "time", Formulation.GAUSS)._kernel_args

    def mul(k):
        return lambda: k.mul(a, b, ctx.mul_i, ctx.mul_j, ctx.mul_t, ctx.size)

    def eval_map(k):
        return lambda: k.eval_map(coef, x, ctx.parent, ctx.pvar)

    def ecchill(k):
        return lambda: k.ecchill_fast_rhs(0.3, y_fast, *args_fast)

    def mee_rhs(k):
        return lambda: k.mee_gauss_rhs(0.0, y_mee, *args_mee)

    def step(k):
        rhs = lambda s, y: k.mee_gauss_rhs(s, y, *args_mee)  # noqa: E731
        return lambda: k.rk87_step(rhs, 0.0, y_mee, 0.05, C, A_ROWS, B8, DB)

    return [
        ("truncated product (6 vars, order 5)", mul, 200),
        ("map evaluation (7 x 462 terms)", eval_map, 2000),
        ("eccentric-Hill fast-angle derivatives", ecchill, 20000),
        ("equinoctial Gauss derivatives", mee_rhs, 20000),
        ("RK8(7) step, equinoctial elements", step, 2000),
    ]


def _close(u, v):
    if isinstance(u, tuple):
        return all(_close(p, q) for p, q in zip(u, v))
    return np.allclose(np.asarray(u, dtype=float), np.asarray(v, dtype=float),
                       rtol=1e-12, atol=1e-15)


_E2E = """
import time
from hotm import BACKEND
from hotm.harness import build_case_map, iterate
t0 = time.perf_counter()
tm = build_case_map(1, "ecchill")
t1 = time.perf_counter()
iterate(tm, {n}, safety=False)
t2 = time.perf_counter()
print(BACKEND, t1 - t0, t2 - t1)
"""


def end_to_end(n: int) -> list[tuple[str, float, float]]:
    out = []
    for pure in ("1", "0"):
        env = dict(os.environ, HOTM_PURE_PYTHON=pure)
        res = subprocess.run([sys.executable, "-c", _E2E.format(n=n)], env=env,
                             capture_output=True, text=True, check=True)
        name, build, it = res.stdout.split()
        out.append((name, float(build), float(it)))
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="fewer repetitions")
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not available; nothing to compare")
        return 1
    scale = 10 if args.quick else 1
    print(f"{'kernel':40s} {'python':>12s} {'cython':>12s} {'speed-up':>9s}")
    for name, make, number in _cases():
        fp, fc = make(_pykernels), make(_ckernels)
        if not _close(fp(), fc()):
            print(f"{name}: backends disagree")
            return 1
        tp = _time(fp, max(1, number // scale))
        tc = _time(fc, max(1, number // scale))
        print(f"{name:40s} {tp * 1e6:10.2f}us {tc * 1e6:10.2f}us {tp / tc:8.1f}x")
    n = 1000 if args.quick else 10000
    print(f"\nend to end, case 1 eccentric-Hill map: build + {n} mappings")
    rows = end_to_end(n)
    for name, build, it in rows:
        print(f"  {name:8s} build {build:7.3f} s   iterate {it:7.3f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
