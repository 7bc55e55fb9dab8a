"""Timing comparison: numba-compiled kernels vs the plain-Python fallback.

Runs the same full backward induction twice in subprocesses, once with numba
enabled (the default) and once with ``PWLDP_DISABLE_NUMBA=1``, and reports
wall-clock times.  Usage::

    python3 benchmarks/bench_kernels.py [n_steps] [n_kinks]

The default workload (20 steps, 100 kinks) is a quick smoke run where both
modes are comparable; the compiled kernels pull ahead as kink counts grow
(e.g. ``25 200`` runs about 3x faster with numba).
"""

import os
import subprocess
import sys
import textwrap

WORKLOAD = textwrap.dedent(
    """
    import os, time
    import numpy as np
    import pwldp
    from pwldp.kernels import USE_NUMBA

    n = int(os.environ["BENCH_N"])
    n_kinks = int(os.environ["BENCH_KINKS"])
    spec = pwldp.crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=n, mu=0.015)
    U = pwldp.approximate_utility(lambda w: np.log1p(np.asarray(w)), 0.0, 10.0, n_kinks)

    # warm-up (includes any jit compilation)
    pwldp.solve(pwldp.crr_spec(s0=5.0, sigma=0.10, r=0.01, T=1.0, n=3, mu=0.015),
                U, keep="root")
    t0 = time.perf_counter()
    surf = pwldp.solve(spec, U, keep="root")
    t1 = time.perf_counter()
    root = surf.root.value
    print(f"numba={'on ' if USE_NUMBA else 'off'} n={n} terminal_kinks={n_kinks} "
          f"root_kinks={root.n} solve_time={t1 - t0:.3f}s")
    """
)


def run(disable_numba: bool, n: int, kinks: int) -> None:
    env = dict(os.environ, BENCH_N=str(n), BENCH_KINKS=str(kinks))
    if disable_numba:
        env["PWLDP_DISABLE_NUMBA"] = "1"
    else:
        env.pop("PWLDP_DISABLE_NUMBA", None)
    subprocess.run([sys.executable, "-c", WORKLOAD], env=env, check=True)


if __name__ == "__main__":
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    kinks = int(sys.argv[2]) if len(sys.argv) > 2 else 100
    run(False, n, kinks)
    run(True, n, kinks)
