"""Exact backward induction on a binomial tree.

Each node's value function is obtained from its two successors by walking the
grid of wealth/investment lines on which optimal strategies must lie, in
decreasing wealth order.  The walk produces the predecessor's kinks, values,
left slopes and optimal investments in one O(N) sweep (see
:func:`pwldp.kernels.backstep_core`).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hfunc import HFunc, clean_points, prune
from .kernels import backstep_core
from .lattice import LatticeSpec


@dataclass(frozen=True)
class StepInputs:
    """Successor value functions and step coefficients for one node."""

    vu: HFunc
    vd: HFunc
    p: float
    q: float
    u: float
    d: float
    R: float

    def validate(self) -> None:
        if not (0.0 < self.p < 1.0 and 0.0 < self.q < 1.0):
            raise ValueError(f"probabilities out of (0,1): p={self.p}, q={self.q}")
        if not self.d < self.R < self.u:
            raise ValueError(f"need d < R < u, got d={self.d}, R={self.R}, u={self.u}")
        q_implied = (self.R - self.d) / (self.u - self.d)
        if abs(self.q - q_implied) > 1e-9 * max(1.0, abs(q_implied)):
            raise ValueError(
                f"q={self.q} inconsistent with (R-d)/(u-d)={q_implied}"
            )

    def objective(self, w, b):
        """The one-step expected-utility objective H(w, b); vectorized in b."""
        b = np.asarray(b, dtype=np.float64)
        up = self.vu.evaluate(w * self.R + b * (self.u - self.R))
        dn = self.vd.evaluate(w * self.R + b * (self.d - self.R))
        return (self.p * up + (1.0 - self.p) * dn) / self.R


@dataclass
class StepResult:
    """Value function plus the optimal-investment polyline at one node.

    The policy is piecewise linear through ``(policy_x, policy_beta)`` and
    continues along straight rays on either side: ``beta = a*w + b`` with
    ``(a, b)`` from ``lo_ray`` / ``hi_ray``.  Terminal nodes carry no policy.
    """

    value: HFunc
    policy_x: np.ndarray | None = None
    policy_beta: np.ndarray | None = None
    lo_ray: tuple[float, float] | None = None
    hi_ray: tuple[float, float] | None = None


def backstep(inputs: StepInputs) -> StepResult:
    """One exact dynamic-programming step; both outputs stay piecewise linear."""
    inputs.validate()
    vu, vd = inputs.vu, inputs.vd
    xs_r, vs_r, zs_r, betas_r, count, ray_on_u, ray_x = backstep_core(
        vu.xs, vu.vs, vu.left_slopes,
        vd.xs, vd.vs, vd.left_slopes,
        inputs.p, inputs.q, inputs.u, inputs.d, inputs.R,
    )
    xs = xs_r[:count][::-1].copy()
    vs = vs_r[:count][::-1].copy()
    betas = betas_r[:count][::-1].copy()
    slope_left = float(zs_r[count - 1])
    value = clean_points(xs, vs, slope_left)

    # policy polyline keeps every grid intersection visited (a superset of the
    # value kinks); duplicates resolved by the minimal-investment convention
    order = np.lexsort((betas, xs))
    px = xs[order]
    pb = betas[order]
    if px.size > 1:
        keep = np.concatenate(([True], np.diff(px) > 1e-15 * np.maximum(1.0, np.abs(px[:-1]))))
        px = px[keep]
        pb = pb[keep]

    u, d, R = inputs.u, inputs.d, inputs.R
    hi_ray = (-R / (u - R), float(vu.xs[-1]) / (u - R))
    if ray_on_u:
        lo_ray = (-R / (u - R), float(ray_x) / (u - R))
    else:
        lo_ray = (R / (R - d), -float(ray_x) / (R - d))
    return StepResult(value=value, policy_x=px, policy_beta=pb, lo_ray=lo_ray, hi_ray=hi_ray)


def policy_at(res: StepResult, w):
    """Minimal optimal risky investment at wealth w (vectorized)."""
    if res.policy_x is None:
        raise ValueError("terminal node has no investment policy")
    w = np.asarray(w, dtype=np.float64)
    out = np.interp(w, res.policy_x, res.policy_beta)
    lo_a, lo_b = res.lo_ray
    hi_a, hi_b = res.hi_ray
    out = np.where(w < res.policy_x[0], lo_a * w + lo_b, out)
    out = np.where(w > res.policy_x[-1], hi_a * w + hi_b, out)
    return out if out.ndim else float(out)


class ValueSurface:
    """Per-node step results over (part of) the tree."""

    def __init__(self, n: int, nodes: dict):
        self.n = n
        self._nodes = nodes

    def node(self, m: int, k: int) -> StepResult:
        return self._nodes[(m, k)]

    @property
    def root(self) -> StepResult:
        return self._nodes[(0, 0)]

    def __contains__(self, key) -> bool:
        return key in self._nodes

    def items(self):
        return self._nodes.items()


def _as_terminal_list(spec: LatticeSpec, terminal) -> list[HFunc]:
    levels = spec.levels(spec.n)
    if isinstance(terminal, HFunc):
        return [terminal] * levels
    if callable(terminal):
        return [terminal(k) for k in range(levels)]
    terminal = list(terminal)
    if len(terminal) != levels:
        raise ValueError(f"expected {levels} terminal functions, got {len(terminal)}")
    return terminal


def solve(
    spec: LatticeSpec,
    terminal,
    eps_step: float = 0.0,
    keep: str = "all",
    prune_every: int = 1,
    threads: int = 1,
) -> ValueSurface:
    """Backward sweep over the whole tree.

    ``terminal`` is a single HFunc, a list per terminal level, or a callable
    ``k -> HFunc``.  With ``eps_step > 0`` each freshly computed value function
    is simplified before being used upstream, so the root error is at most
    ``n * eps_step``.  ``keep="root"`` stores only the root result (two-layer
    rolling memory).  Output is independent of ``threads``.
    """
    if eps_step < 0:
        raise ValueError("eps_step must be nonnegative")
    if keep not in ("all", "root"):
        raise ValueError("keep must be 'all' or 'root'")
    n = spec.n
    layer = _as_terminal_list(spec, terminal)
    nodes: dict = {}
    if keep == "all":
        for k, f in enumerate(layer):
            nodes[(n, k)] = StepResult(value=f)

    def solve_node(m, k, succ):
        c = spec.coeffs(m, k)
        res = backstep(
            StepInputs(vu=succ[k + 1], vd=succ[k], p=c.p, q=c.q, u=c.u, d=c.d, R=c.R)
        )
        if eps_step > 0.0 and (n - m) % prune_every == 0:
            res.value = prune(res.value, eps_step)
        return res

    for m in range(n - 1, -1, -1):
        ks = range(spec.levels(m))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda k: solve_node(m, k, layer), ks))
        else:
            results = [solve_node(m, k, layer) for k in ks]
        if keep == "all":
            for k, res in zip(ks, results):
                nodes[(m, k)] = res
        layer = [res.value for res in results]
        if keep == "root" and m == 0:
            nodes[(0, 0)] = results[0]
    if n == 0 and (0, 0) not in nodes:
        nodes[(0, 0)] = StepResult(value=layer[0])
    return ValueSurface(n=n, nodes=nodes)
