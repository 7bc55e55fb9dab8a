"""Shared helpers: random concave-piecewise-linear generators and a dense-grid
brute-force maximizer used as an independent reference for the one-step solve."""

import numpy as np
import pytest
from hypothesis import strategies as st

from pwldp import HFunc


def make_hfunc(rng: np.random.Generator, max_kinks: int = 6,
               x_range: float = 3.0) -> HFunc:
    """Random valid piecewise-linear concave increasing function with plateau."""
    n = int(rng.integers(1, max_kinks + 1))
    xs = np.sort(rng.uniform(-x_range, x_range, size=n))
    # enforce minimum spacing so segments are well conditioned
    xs = xs[0] + np.concatenate(([0.0], np.cumsum(np.maximum(np.diff(xs), 0.05))))
    # strictly decreasing positive slopes, then build values left to right
    drops = rng.uniform(0.1, 1.0, size=n)
    slopes = np.cumsum(drops[::-1])[::-1]  # slopes[0] > ... > slopes[n-1] > 0
    slope_left = slopes[0] + rng.uniform(0.1, 1.0)
    vs = np.empty(n)
    vs[0] = rng.uniform(-2.0, 2.0)
    for i in range(1, n):
        vs[i] = vs[i - 1] + slopes[i - 1] * (xs[i] - xs[i - 1])
    return HFunc(xs, vs, slope_left)


@st.composite
def hfuncs(draw, max_kinks: int = 6):
    """Hypothesis strategy wrapping :func:`make_hfunc` via a drawn seed."""
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return make_hfunc(np.random.default_rng(seed), max_kinks=max_kinks)


def brute_force_value(vu: HFunc, vd: HFunc, p: float, u: float, d: float,
                      R: float, w, b_grid: np.ndarray):
    """Dense-grid maximization of the one-step objective at wealth w."""
    w = float(w)
    up = vu.evaluate(w * R + b_grid * (u - R))
    dn = vd.evaluate(w * R + b_grid * (d - R))
    obj = (p * up + (1.0 - p) * dn) / R
    k = int(np.argmax(obj))
    return float(obj[k]), float(b_grid[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
