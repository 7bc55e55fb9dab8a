"""Recombining binomial trees for a single tradeable risky asset.

A spec supplies, per node, the up/down gross returns, the riskfree return and
the mean growth rate; physical and risk-neutral up-probabilities follow from
those.  Nodes are addressed as ``(m, k)`` with ``m`` the time index and ``k``
the number of up moves, prices being computed on demand.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


class InvalidLatticeError(ValueError):
    """Raised when a spec violates no-arbitrage (u > R > d) or p,q bounds."""


@dataclass(frozen=True)
class NodeCoeffs:
    """Per-node step coefficients used by the backward induction."""

    u: float
    d: float
    R: float
    p: float
    q: float


class LatticeSpec:
    """Node-indexed coefficients on a recombining binomial tree.

    ``u_fn``/``d_fn``/``mu_fn`` take ``(m, S)``; ``r_fn`` takes ``m``;
    ``count_fn(m)`` is the largest price-level index at step ``m``.
    """

    def __init__(
        self,
        n: int,
        T: float,
        s0: float,
        u_fn: Callable[[int, float], float],
        d_fn: Callable[[int, float], float],
        r_fn: Callable[[int], float],
        mu_fn: Callable[[int, float], float],
        count_fn: Callable[[int], int] | None = None,
        price_fn: Callable[[int, int], float] | None = None,
    ):
        if n < 0:
            raise InvalidLatticeError("n must be nonnegative")
        self.n = int(n)
        self.T = float(T)
        self.dt = self.T / self.n if self.n else 0.0
        self.s0 = float(s0)
        self.u_fn = u_fn
        self.d_fn = d_fn
        self.r_fn = r_fn
        self.mu_fn = mu_fn
        self.count_fn = count_fn or (lambda m: m)
        self._price_fn = price_fn

    def levels(self, m: int) -> int:
        """Number of price levels at step m (= count + 1)."""
        return self.count_fn(m) + 1

    def price(self, m: int, k: int) -> float:
        if self._price_fn is not None:
            return self._price_fn(m, k)
        # generic walk down the first column then up; only used for small
        # non-constant specs, CRR overrides with the closed form
        s = self.s0
        for step in range(m):
            s *= self.d_fn(step, s)
        for step in range(k):
            s *= self.u_fn(m - 1, s) / self.d_fn(m - 1, s)
        return s

    def coeffs(self, m: int, k: int) -> NodeCoeffs:
        s = self.price(m, k)
        u = self.u_fn(m, s)
        d = self.d_fn(m, s)
        R = math.exp(self.r_fn(m) * self.dt)
        if not u > R > d:
            raise InvalidLatticeError(
                f"arbitrage bounds violated at node ({m},{k}): u={u}, R={R}, d={d}"
            )
        p = (math.exp(self.mu_fn(m, s) * self.dt) - d) / (u - d)
        q = (R - d) / (u - d)
        if not (0.0 < p < 1.0 and 0.0 < q < 1.0):
            raise InvalidLatticeError(
                f"transition probabilities out of (0,1) at node ({m},{k}): p={p}, q={q}"
            )
        return NodeCoeffs(u=u, d=d, R=R, p=p, q=q)


def crr_spec(
    s0: float,
    sigma: float,
    r: float,
    T: float,
    n: int,
    mu: float | None = None,
) -> LatticeSpec:
    """Constant-coefficient Cox-Ross-Rubinstein tree: ``u = 1/d = exp(sigma
    sqrt(dt))``.  ``mu`` defaults to ``r + sigma^2 / 2``."""
    if sigma <= 0:
        raise InvalidLatticeError("sigma must be positive")
    if n < 1:
        raise InvalidLatticeError("n must be at least 1")
    dt = T / n
    u = math.exp(sigma * math.sqrt(dt))
    d = 1.0 / u
    R = math.exp(r * dt)
    if not u > R > d:
        raise InvalidLatticeError(f"CRR parameters violate u > R > d: u={u}, R={R}")
    if mu is None:
        mu = r + 0.5 * sigma * sigma
    spec = LatticeSpec(
        n=n,
        T=T,
        s0=s0,
        u_fn=lambda m, s: u,
        d_fn=lambda m, s: d,
        r_fn=lambda m: r,
        mu_fn=lambda m, s: mu,
        price_fn=lambda m, k: s0 * u ** k * d ** (m - k),
    )
    spec.coeffs(0, 0)  # fail fast on bad p/q
    return spec


def table_spec(
    s0: float,
    T: float,
    u_table: np.ndarray,
    d_table: np.ndarray,
    r_table: np.ndarray,
    mu_table: np.ndarray,
) -> LatticeSpec:
    """Spec from per-node coefficient arrays ``table[m][k]`` (ragged lists or
    rectangular arrays), for time/state-varying trees."""
    n = len(r_table)
    u_t = [np.asarray(row, dtype=float) for row in u_table]
    d_t = [np.asarray(row, dtype=float) for row in d_table]
    mu_t = [np.asarray(row, dtype=float) for row in mu_table]
    r_t = np.asarray(r_table, dtype=float)

    prices: list[np.ndarray] = [np.array([s0])]
    for m in range(n):
        prev = prices[-1]
        nxt = np.empty(prev.size + 1)
        nxt[0] = prev[0] * d_t[m][0]
        for k in range(prev.size):
            nxt[k + 1] = prev[k] * u_t[m][k]
        prices.append(nxt)

    def price_fn(m, k):
        return float(prices[m][k])

    def lookup(tab):
        def fn(m, s):
            row = tab[m]
            k = int(np.argmin(np.abs(prices[m] - s)))
            return float(row[min(k, row.size - 1)])

        return fn

    return LatticeSpec(
        n=n,
        T=T,
        s0=s0,
        u_fn=lookup(u_t),
        d_fn=lookup(d_t),
        r_fn=lambda m: float(r_t[m]),
        mu_fn=lookup(mu_t),
        price_fn=price_fn,
    )


def probabilities(spec: LatticeSpec, m: int, k: int) -> tuple[float, float]:
    """Physical and risk-neutral up-probabilities (p, q) at a node."""
    c = spec.coeffs(m, k)
    return c.p, c.q
