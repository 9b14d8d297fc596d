"""Compiled kernels against their pure-Python originals.

    python3 benchmarks/bench_kernels.py [--ns 128] [--nt 256] [--repeat 3]

Each kernel is timed through ``.py_func`` (the undecorated function) and
through the numba dispatcher; the outputs are compared too. A final
end-to-end row times one HUM solve in two subprocesses, with and without
``FBCONTROL_DISABLE_NUMBA=1``.
"""
import argparse
import contextlib
import os
import subprocess
import sys
import timeit

import numpy as np

from fbcontrol import kernels
from fbcontrol._accel import USE_NUMBA
from fbcontrol.config import reference_config
from fbcontrol.forward import step_system
from fbcontrol.transform import BoundaryTrajectory

END_TO_END = """
import time, numpy as np
from fbcontrol.config import control_reference_config
from fbcontrol.hum import hum_solve
from fbcontrol.transform import BoundaryTrajectory, space_nodes
cfg = control_reference_config(Ns={ns}, Nt={nt})
l = BoundaryTrajectory.wobble(cfg)
y0 = cfg.eps * np.sin(np.pi * space_nodes(cfg) / cfg.L0); y0[[0, -1]] = 0.0
hum_solve(y0, l, cfg)
t0 = time.perf_counter(); hum_solve(y0, l, cfg); print(time.perf_counter() - t0)
"""


def kernel_cases(ns, nt, rng):
    cfg = reference_config(Ns=ns, Nt=nt)
    sys_ = step_system(BoundaryTrajectory.wobble(cfg), cfg)
    lo, di, up = sys_.lo, sys_.di, sys_.up
    m = di.shape[1]
    w0 = rng.standard_normal(m)
    src = rng.standard_normal(di.shape)
    weights = 0.5 + rng.random(m)
    scale = 1.0 + 0.1 * rng.random(di.shape[0])
    f = rng.standard_normal(nt + 1)
    t = np.linspace(0.0, 1.0, nt + 1)
    return {
        "forward_sweep": (kernels.forward_sweep, lambda: (lo, di, up, w0, src, np.empty_like(src))),
        "adjoint_sweep": (kernels.adjoint_sweep, lambda: (lo, di, up, weights, scale, w0, src, np.empty_like(src))),
        "holder_seminorm": (kernels.holder_seminorm, lambda: (f, t, 0.5)),
    }


def run_kernel(fn, make_args):
    args = make_args()
    res = fn(*args)
    # sweeps write into their last argument
    return args[-1] if isinstance(args[-1], np.ndarray) else res


@contextlib.contextmanager
def pure_python():
    """Route the sweeps' inner ``thomas_solve`` calls to the Python original too."""
    compiled = kernels.thomas_solve
    kernels.thomas_solve = compiled.py_func
    try:
        yield
    finally:
        kernels.thomas_solve = compiled


def bench(fn, make_args, repeat):
    args = make_args()
    fn(*args)  # warm up / compile
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def end_to_end(ns, nt):
    out = {}
    for label, flag in (("numba", "0"), ("python", "1")):
        env = dict(os.environ, FBCONTROL_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", END_TO_END.format(ns=ns, nt=nt)],
                              env=env, capture_output=True, text=True, check=True)
        out[label] = float(proc.stdout.strip().splitlines()[-1])
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ns", type=int, default=128)
    ap.add_argument("--nt", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)

    if not USE_NUMBA:
        print("numba disabled in this process; both columns run the Python code")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<18}{'python [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, (fn, make_args) in kernel_cases(args.ns, args.nt, rng).items():
        # compile before the pure-Python swap so the dispatcher never sees it
        t_nb = bench(fn, make_args, args.repeat)
        ref = np.asarray(run_kernel(fn, make_args))
        with pure_python():
            diff = np.max(np.abs(np.asarray(run_kernel(fn.py_func, make_args)) - ref))
            t_py = bench(fn.py_func, make_args, args.repeat)
        print(f"{name:<18}{t_py:>12.4g}{t_nb:>12.4g}{t_py / t_nb:>10.1f}{diff:>12.2e}")

    if not args.skip_end_to_end:
        e2e = end_to_end(args.ns, args.nt // 2)
        print(f"{'hum_solve':<18}{e2e['python']:>12.4g}{e2e['numba']:>12.4g}{e2e['python'] / e2e['numba']:>10.1f}"
              f"{'':>12}")


if __name__ == "__main__":
    main()
