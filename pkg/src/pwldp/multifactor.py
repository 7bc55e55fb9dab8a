"""Two-factor extensions: an untradeable factor Y next to the traded asset.

The four successor value functions of a (S, Y) node are folded into two
conditional mixtures, after which the single-factor backstep applies
unchanged.  Two concrete trees are provided: a correlated double-binomial
(both factors geometric Brownian motions) and a discretized Heston model
where off-grid successors are redistributed onto the next step's rectangular
grid with bilinear weights.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dp import StepInputs, StepResult, backstep
from .hfunc import HFunc, conic_combine, prune

log = logging.getLogger(__name__)

_DEGENERATE_TOL = 1e-14


class DegenerateSplitError(ValueError):
    """Raised when a conditional probability collapses to 0 or 1."""


def mix_successors(quads) -> tuple[float, HFunc, HFunc]:
    """Fold four (probability, value-function) successors into the two
    S-conditional mixtures.

    ``quads`` is ordered (uu, ud, du, dd) where the first letter is the S move
    and the second the Y move.  Returns ``(p_u, V_up, V_down)``.
    """
    (p_uu, f_uu), (p_ud, f_ud), (p_du, f_du), (p_dd, f_dd) = quads
    probs = np.array([p_uu, p_ud, p_du, p_dd], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError(f"joint probabilities must be nonnegative and sum to 1, got {probs}")
    p_u = p_uu + p_ud
    if not 0.0 < p_u < 1.0:
        raise DegenerateSplitError(f"conditional S-up probability degenerate: p_u={p_u}")
    fu = conic_combine([(p_uu / p_u, f_uu), (p_ud / p_u, f_ud)])
    p_d = 1.0 - p_u
    fd = conic_combine([(p_du / p_d, f_du), (p_dd / p_d, f_dd)])
    return p_u, fu, fd


# ---------------------------------------------------------------------------
# correlated double-binomial tree (both factors geometric Brownian motions)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoFactorGBMSpec:
    """Tradeable S and untradeable Y, both lognormal, correlation rho."""

    s0: float
    y0: float
    mu_s: float
    sigma_s: float
    mu_y: float
    sigma_y: float
    rho: float
    r: float
    T: float
    n: int


class TwoFactorLattice:
    """Recombining (S, Y) tree with the sign-matched joint step distribution:
    probability (1+rho)/4 when both factors move the same way, (1-rho)/4
    otherwise."""

    def __init__(self, spec: TwoFactorGBMSpec):
        if abs(spec.rho) > 1.0:
            raise ValueError(f"|rho| must be <= 1, got {spec.rho}")
        if spec.n < 1:
            raise ValueError("n must be at least 1")
        self.spec = spec
        self.n = spec.n
        self.dt = spec.T / spec.n
        sdt = math.sqrt(self.dt)
        self.u_s = math.exp((spec.mu_s - 0.5 * spec.sigma_s**2) * self.dt + spec.sigma_s * sdt)
        self.d_s = math.exp((spec.mu_s - 0.5 * spec.sigma_s**2) * self.dt - spec.sigma_s * sdt)
        self.u_y = math.exp((spec.mu_y - 0.5 * spec.sigma_y**2) * self.dt + spec.sigma_y * sdt)
        self.d_y = math.exp((spec.mu_y - 0.5 * spec.sigma_y**2) * self.dt - spec.sigma_y * sdt)
        self.R = math.exp(spec.r * self.dt)
        if not self.u_s > self.R > self.d_s:
            raise ValueError("S parameters violate u > R > d")
        same = 0.25 * (1.0 + spec.rho)
        diff = 0.25 * (1.0 - spec.rho)
        # order (uu, ud, du, dd): first index S, second Y
        self.joint = (same, diff, diff, same)
        self.q = (self.R - self.d_s) / (self.u_s - self.d_s)

    def asset(self, m: int, k: int) -> float:
        return self.spec.s0 * self.u_s**k * self.d_s ** (m - k)

    def factor(self, m: int, l: int) -> float:
        return self.spec.y0 * self.u_y**l * self.d_y ** (m - l)


def correlated_lattice(spec: TwoFactorGBMSpec) -> TwoFactorLattice:
    return TwoFactorLattice(spec)


class TwoFactorSurface:
    """Per-node step results keyed by (m, k, l)."""

    def __init__(self, n: int, nodes: dict):
        self.n = n
        self._nodes = nodes

    def node(self, m: int, k: int, l: int) -> StepResult:
        return self._nodes[(m, k, l)]

    @property
    def root(self) -> StepResult:
        return self._nodes[(0, 0, 0)]

    def items(self):
        return self._nodes.items()


def solve_two_factor(
    tree: TwoFactorLattice,
    terminal,
    eps_step: float = 0.0,
    keep: str = "all",
    prune_every: int = 1,
    threads: int = 1,
) -> TwoFactorSurface:
    """Backward sweep over the (S, Y) tree.

    ``terminal`` is a callable ``(k, l) -> HFunc`` for the step-n nodes.
    """
    n = tree.n
    layer = {(k, l): terminal(k, l) for k in range(n + 1) for l in range(n + 1)}
    nodes: dict = {}
    if keep == "all":
        for (k, l), f in layer.items():
            nodes[(n, k, l)] = StepResult(value=f)
    p_uu, p_ud, p_du, p_dd = tree.joint

    def solve_node(m, k, l, succ):
        p_u, fu, fd = mix_successors(
            [
                (p_uu, succ[(k + 1, l + 1)]),
                (p_ud, succ[(k + 1, l)]),
                (p_du, succ[(k, l + 1)]),
                (p_dd, succ[(k, l)]),
            ]
        )
        res = backstep(
            StepInputs(vu=fu, vd=fd, p=p_u, q=tree.q, u=tree.u_s, d=tree.d_s, R=tree.R)
        )
        if eps_step > 0.0 and (n - m) % prune_every == 0:
            res.value = prune(res.value, eps_step)
        return res

    for m in range(n - 1, -1, -1):
        kl = [(k, l) for k in range(m + 1) for l in range(m + 1)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda pair: solve_node(m, *pair, layer), kl))
        else:
            results = [solve_node(m, k, l, layer) for k, l in kl]
        if keep == "all":
            for (k, l), res in zip(kl, results):
                nodes[(m, k, l)] = res
        layer = {pair: res.value for pair, res in zip(kl, results)}
        if keep == "root" and m == 0:
            nodes[(0, 0, 0)] = results[0]
    return TwoFactorSurface(n=n, nodes=nodes)


# ---------------------------------------------------------------------------
# discretized Heston tree with bilinear redistribution onto per-step grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HestonSpec:
    """Square-root variance factor Y driving the stock's volatility.

    With ``lam`` set, the stock's mean growth rate is state dependent,
    ``mu(Y) = r + lam * Y``; otherwise the constant ``mu`` is used.
    Negative variance excursions are truncated to zero inside all square
    roots (full truncation).
    """

    kappa: float
    theta: float
    omega: float
    rho: float
    r: float
    T: float
    n: int
    m_z: int
    m_v: int
    s0: float
    y0: float
    mu: float | None = None
    lam: float | None = None

    def __post_init__(self):
        if self.m_z < 1 or self.m_v < 1:
            raise ValueError("m_z and m_v must be at least 1")
        if abs(self.rho) > 1.0:
            raise ValueError("|rho| must be <= 1")
        if min(self.kappa, self.theta, self.omega) <= 0:
            raise ValueError("kappa, theta, omega must be positive")
        if (self.mu is None) == (self.lam is None):
            raise ValueError("exactly one of mu, lam must be given")

    @property
    def dt(self) -> float:
        return self.T / self.n

    def drift_rate(self, y: float) -> float:
        return self.r + self.lam * y if self.lam is not None else self.mu

    def joint_probs(self) -> tuple[float, float, float, float]:
        same = 0.25 * (1.0 + self.rho)
        diff = 0.25 * (1.0 - self.rho)
        return (same, diff, diff, same)


def _y_next(spec: HestonSpec, y: float, eta: float) -> float:
    yp = max(y, 0.0)
    return y + spec.kappa * (spec.theta - yp) * spec.dt + eta * spec.omega * math.sqrt(yp * spec.dt)


def _lns_next(spec: HestonSpec, lns: float, y: float, eta: float) -> float:
    yp = max(y, 0.0)
    return lns + (spec.drift_rate(y) - 0.5 * y) * spec.dt + eta * math.sqrt(yp * spec.dt)


def heston_step_targets(spec: HestonSpec, lns: float, y: float):
    """The four off-grid successor points of a node, as (eta_s, eta_y,
    lns_next, y_next) tuples, ordered (uu, ud, du, dd)."""
    out = []
    for eta_s in (1.0, -1.0):
        for eta_y in (1.0, -1.0):
            out.append((eta_s, eta_y, _lns_next(spec, lns, y, eta_s), _y_next(spec, y, eta_y)))
    return out


def _interval_image(fn, lo: float, hi: float, crits) -> tuple[float, float]:
    cands = [lo, hi] + [c for c in crits if lo < c < hi]
    vals = [fn(c) for c in cands]
    return min(vals), max(vals)


def heston_grids(spec: HestonSpec) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Per-step log-price and variance grid levels.

    Bounds come from forward interval propagation: the one-step maps are
    applied to the previous interval's endpoints and interior critical points,
    so the grids cover (a superset of) all reachable states.
    """
    dt = spec.dt
    sdt = math.sqrt(dt)
    lns_grids = [np.array([math.log(spec.s0)])]
    y_grids = [np.array([spec.y0])]
    lns_lo = lns_hi = math.log(spec.s0)
    y_lo = y_hi = spec.y0
    for m in range(1, spec.n + 1):
        new_y = []
        for eta in (1.0, -1.0):
            crits = [0.0]
            # stationary point of y -> y + kappa(theta - y)dt + eta*omega*sqrt(y dt)
            denom = 1.0 - spec.kappa * dt
            if denom != 0.0:
                root = -eta * spec.omega * sdt / (2.0 * denom)
                if root > 0.0:
                    crits.append(root**2)
            lo, hi = _interval_image(lambda y: _y_next(spec, y, eta), y_lo, y_hi, crits)
            new_y.extend([lo, hi])
        new_lns = []
        c_drift = (spec.lam - 0.5) if spec.lam is not None else -0.5
        for eta in (1.0, -1.0):
            crits = [0.0]
            if c_drift * eta < 0:
                ystar = 1.0 / (4.0 * c_drift**2 * dt)
                crits.append(ystar)
            lo, hi = _interval_image(lambda y: _lns_next(spec, 0.0, y, eta), y_lo, y_hi, crits)
            new_lns.extend([lo, hi])
        y_lo, y_hi = min(new_y), max(new_y)
        lns_lo, lns_hi = lns_lo + min(new_lns), lns_hi + max(new_lns)
        if lns_hi - lns_lo > _DEGENERATE_TOL:
            lns_grids.append(np.linspace(lns_lo, lns_hi, spec.m_z + 1))
        else:
            lns_grids.append(np.array([lns_lo]))
        if y_hi - y_lo > _DEGENERATE_TOL:
            y_grids.append(np.linspace(y_lo, y_hi, spec.m_v + 1))
        else:
            y_grids.append(np.array([y_lo]))
    return lns_grids, y_grids


def _axis_weights(grid: np.ndarray, x: float) -> tuple[int, float]:
    """Cell index and the weight of the *upper* cell edge along one axis.

    Out-of-range targets clamp to the boundary cell (logged); degenerate
    single-level axes get full weight."""
    if grid.size == 1:
        return 0, 0.0
    if x < grid[0] or x > grid[-1]:
        span = grid[-1] - grid[0]
        if max(grid[0] - x, x - grid[-1]) > 1e-9 * max(1.0, abs(span)):
            # boundary hits within float noise are clamped silently
            log.warning(
                "interpolation target %g outside grid [%g, %g]; clamping",
                x, grid[0], grid[-1],
            )
        x = min(max(x, grid[0]), grid[-1])
    i = int(np.searchsorted(grid, x, side="right")) - 1
    i = min(max(i, 0), grid.size - 2)
    t = (x - grid[i]) / (grid[i + 1] - grid[i])
    return i, min(max(t, 0.0), 1.0)


def bilinear_weights(target: tuple[float, float], gx: np.ndarray, gy: np.ndarray):
    """Cell indices and the four nonnegative weights (summing to one) that
    place an off-grid (log-price, variance) target onto the bracketing cell.
    Weight order is [(0,0), (0,1), (1,0), (1,1)] in (x, y) edge offsets."""
    i, tx = _axis_weights(gx, target[0])
    j, ty = _axis_weights(gy, target[1])
    w = np.array(
        [
            (1.0 - tx) * (1.0 - ty),
            (1.0 - tx) * ty,
            tx * (1.0 - ty),
            tx * ty,
        ]
    )
    return i, j, w


class HestonSurface:
    """Step results on the per-step rectangular grids."""

    def __init__(self, spec: HestonSpec, lns_grids, y_grids, nodes: dict):
        self.spec = spec
        self.n = spec.n
        self.lns_grids = lns_grids
        self.y_grids = y_grids
        self._nodes = nodes

    def node(self, m: int, k: int, l: int) -> StepResult:
        return self._nodes[(m, k, l)]

    @property
    def root(self) -> StepResult:
        return self._nodes[(0, 0, 0)]

    def items(self):
        return self._nodes.items()


def heston_backstep(spec: HestonSpec, lns: float, y: float, gx_next, gy_next, succ) -> StepResult:
    """One node of the Heston sweep.

    ``succ[k][l]`` are the next step's value functions on the grid
    ``gx_next`` x ``gy_next``.  The four off-grid successors are redistributed
    bilinearly (sixteen effective transitions) and folded into the two
    S-conditional mixtures, after which the single-factor step applies.
    """
    probs = spec.joint_probs()
    dt = spec.dt
    R = math.exp(spec.r * dt)
    terms = {1.0: [], -1.0: []}
    rs = {}
    idx = 0
    for eta_s in (1.0, -1.0):
        rs[eta_s] = math.exp(_lns_next(spec, 0.0, y, eta_s))
        for eta_y in (1.0, -1.0):
            p_joint = probs[idx]
            idx += 1
            target = (_lns_next(spec, lns, y, eta_s), _y_next(spec, y, eta_y))
            i, j, w = bilinear_weights(target, gx_next, gy_next)
            for di in (0, 1):
                for dj in (0, 1):
                    wt = p_joint * w[2 * di + dj]
                    if wt <= 0.0:
                        continue
                    ii = min(i + di, len(succ) - 1)
                    jj = min(j + dj, len(succ[ii]) - 1)
                    terms[eta_s].append((wt, succ[ii][jj]))
    p_bar_up = sum(w for w, _ in terms[1.0])
    if not 0.0 < p_bar_up < 1.0:
        raise DegenerateSplitError(f"conditional S-up probability degenerate: {p_bar_up}")
    v_up = conic_combine([(w / p_bar_up, f) for w, f in terms[1.0]])
    v_dn = conic_combine([(w / (1.0 - p_bar_up), f) for w, f in terms[-1.0]])
    u, d = rs[1.0], rs[-1.0]
    if u - d <= _DEGENERATE_TOL:
        # zero effective volatility: risky and riskfree returns coincide, the
        # investment choice is irrelevant and the value is the plain mixture
        mix = conic_combine([(p_bar_up, v_up), (1.0 - p_bar_up, v_dn)])
        value = HFunc(mix.xs / R, mix.vs / R, mix.slope_left, validate=False)
        return StepResult(
            value=value,
            policy_x=np.array([0.0]),
            policy_beta=np.array([0.0]),
            lo_ray=(0.0, 0.0),
            hi_ray=(0.0, 0.0),
        )
    return backstep(
        StepInputs(vu=v_up, vd=v_dn, p=p_bar_up, q=(R - d) / (u - d), u=u, d=d, R=R)
    )


def solve_heston(
    spec: HestonSpec,
    terminal,
    eps_step: float = 0.0,
    keep: str = "all",
    prune_every: int = 1,
    threads: int = 1,
    stop_at: int = 0,
) -> HestonSurface:
    """Backward sweep over the interpolated Heston tree.

    ``terminal`` is a callable ``(S, Y) -> HFunc`` on the final grid.
    ``stop_at`` halts the sweep after computing layer ``stop_at`` (default 0,
    the root), for mid-horizon inspection without paying for earlier layers.
    """
    gx, gy = heston_grids(spec)
    n = spec.n
    layer = [
        [terminal(math.exp(ls), yv) for yv in gy[n]] for ls in gx[n]
    ]
    nodes: dict = {}
    if keep == "all":
        for k, col in enumerate(layer):
            for l, f in enumerate(col):
                nodes[(n, k, l)] = StepResult(value=f)

    def solve_node(m, k, l, succ):
        res = heston_backstep(spec, gx[m][k], gy[m][l], gx[m + 1], gy[m + 1], succ)
        if eps_step > 0.0 and (n - m) % prune_every == 0:
            res.value = prune(res.value, eps_step)
        return res

    if not 0 <= stop_at <= n:
        raise ValueError("stop_at must lie between 0 and n")
    for m in range(n - 1, stop_at - 1, -1):
        kl = [(k, l) for k in range(gx[m].size) for l in range(gy[m].size)]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(lambda pair: solve_node(m, *pair, layer), kl))
        else:
            results = [solve_node(m, k, l, layer) for k, l in kl]
        if keep == "all":
            for (k, l), res in zip(kl, results):
                nodes[(m, k, l)] = res
        new_layer = [[None] * gy[m].size for _ in range(gx[m].size)]
        for (k, l), res in zip(kl, results):
            new_layer[k][l] = res.value
        layer = new_layer
        if keep == "root" and m == stop_at:
            for (k, l), res in zip(kl, results):
                nodes[(m, k, l)] = res
    return HestonSurface(spec=spec, lns_grids=gx, y_grids=gy, nodes=nodes)
