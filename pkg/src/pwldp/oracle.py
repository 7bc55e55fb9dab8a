"""Closed-form and simulation references used to validate the engine.

All continuous-time formulas are evaluated as stated in the source
literature; the Monte Carlo price uses a counter-based seedable generator
with antithetic variates so results are reproducible in CI.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec
from .multifactor import TwoFactorGBMSpec


@dataclass(frozen=True)
class OracleResult:
    value: float
    strategy: float
    stderr: float | None = None


def crra_utility(w, gamma: float):
    w = np.asarray(w, dtype=float)
    out = (w ** (1.0 - gamma) - 1.0) / (1.0 - gamma)
    return out if out.ndim else float(out)


def cara_utility(w, gamma: float):
    w = np.asarray(w, dtype=float)
    out = -np.exp(-gamma * w)
    return out if out.ndim else float(out)


def sahara_utility(w, alpha: float, beta: float):
    """Symmetrically adjusted hyperbolic absolute risk aversion utility."""
    if alpha <= 0 or alpha == 1.0:
        raise ValueError("alpha must be positive and unequal to one")
    w = np.asarray(w, dtype=float)
    root = np.sqrt(beta * beta + w * w)
    out = (w + root) ** (-alpha) * (w + alpha * root) / (1.0 - alpha * alpha)
    return out if out.ndim else float(out)


def merton_crra(w: float, r: float, mu: float, sigma: float, gamma: float, T: float) -> OracleResult:
    """Continuous-time power-utility benchmark: value ``exp(xi*T) U(w)`` and the
    wealth-proportional strategy."""
    if w <= 0:
        raise ValueError("CRRA wealth must be positive")
    if gamma <= 0 or gamma == 1.0:
        raise ValueError("gamma must be positive and unequal to one")
    excess = mu - r
    xi = (1.0 - gamma) * (r + excess**2 / (2.0 * gamma * sigma**2))
    value = math.exp(xi * T) * crra_utility(w, gamma)
    strategy = excess / (gamma * sigma**2) * w
    return OracleResult(value=value, strategy=strategy)


def merton_cara(w: float, r: float, mu: float, sigma: float, gamma: float, T: float) -> OracleResult:
    """Continuous-time exponential-utility benchmark: wealth-independent
    strategy and value ``exp(xi*T) U(w exp(rT))``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    excess = mu - r
    xi = -(excess**2) / (2.0 * sigma**2)
    value = math.exp(xi * T) * cara_utility(w * math.exp(r * T), gamma)
    strategy = excess / (math.exp(r * T) * gamma * sigma**2)
    return OracleResult(value=value, strategy=strategy)


def sahara(w: float, t: float, r: float, mu: float, sigma: float,
           alpha: float, beta: float, T: float) -> OracleResult:
    """Gamble-for-resurrection benchmark: the strategy stays positive for all
    wealth levels and the value keeps the terminal utility's shape with a
    time-dependent scale parameter and a multiplicative time decay."""
    if alpha <= 0 or alpha == 1.0:
        raise ValueError("alpha must be positive and unequal to one")
    excess = mu - r
    eps = excess / (alpha * sigma)
    b_t = beta * math.exp(-(r - 0.5 * eps * eps) * (T - t))
    strategy = excess / (alpha * sigma**2) * math.sqrt(w * w + b_t * b_t)
    decay = math.exp(-alpha * (r + 0.5 * eps * eps) * (T - t))
    value = decay * sahara_utility(w, alpha, b_t)
    return OracleResult(value=value, strategy=strategy)


def kraft_heston(w: float, t: float, gamma: float, lam: float, rho: float,
                 sigma: float, kappa: float, T: float, grouping: str = "b") -> float:
    """Optimal stock investment under square-root stochastic volatility with
    risk premium proportional to variance.

    ``sigma`` is the volatility-of-volatility.  The published display is
    ambiguous about whether the time factor multiplies the whole bracket
    (grouping "a") or only the correlation correction (grouping "b"); both
    are available, "b" recovers the constant-variance analogue at t = T.
    """
    if grouping not in ("a", "b"):
        raise ValueError("grouping must be 'a' or 'b'")
    k = kappa - (1.0 - 1.0 / gamma) * rho * lam * sigma
    c = gamma / (gamma + rho**2 * (1.0 - gamma))
    B = -(lam**2) * (1.0 - gamma) / (2.0 * c * gamma)
    radicand = k * k + 2.0 * B * sigma * sigma
    if radicand < 0:
        raise ValueError(f"time-decay rate undefined: negative radicand {radicand}")
    a = math.sqrt(radicand)
    tau = T - t
    e = math.exp(a * tau)
    D = (e - 1.0) / (e * (k + a) + a - k)
    correction = (1.0 / gamma) * (1.0 - gamma) * rho * sigma * lam**2
    if grouping == "b":
        return w / gamma * (lam + correction * D)
    return w / gamma * (lam + correction) * D


def mz_price_mc(spec: TwoFactorGBMSpec, gamma: float, payoff, n_samples: int,
                seed: int = 0) -> tuple[float, float]:
    """Monte Carlo indifference price of a payoff on the untradeable factor
    under exponential utility, via the measure-changed expectation.

    Requires ``|rho| < 1`` and zero interest rate.  Antithetic normals from a
    counter-based generator; returns (price, standard error)."""
    if abs(spec.rho) >= 1.0:
        raise ValueError("|rho| must be strictly below 1")
    if spec.r != 0.0:
        raise ValueError("the closed-form price assumes zero interest rate")
    if n_samples < 2:
        raise ValueError("need at least two samples")
    half = n_samples // 2
    rng = np.random.Generator(np.random.Philox(seed))
    z = rng.standard_normal((2, half))
    z1 = np.concatenate([z[0], -z[0]])
    z2 = np.concatenate([z[1], -z[1]])
    T = spec.T
    sq = math.sqrt(T)
    w_s = sq * z1
    w_y = sq * (spec.rho * z1 + math.sqrt(1.0 - spec.rho**2) * z2)
    y_T = spec.y0 * np.exp((spec.mu_y - 0.5 * spec.sigma_y**2) * T + spec.sigma_y * w_y)
    try:
        g = np.asarray(payoff(y_T), dtype=float)
        if g.shape != y_T.shape:
            raise TypeError
    except TypeError:
        g = np.array([float(payoff(y)) for y in y_T])
    lam = spec.mu_s / spec.sigma_s
    density = np.exp(-lam * w_s - 0.5 * lam * lam * T)
    scale = gamma * (1.0 - spec.rho**2)
    x = np.exp(scale * g) * density
    # statistics over antithetic pair averages
    pairs = 0.5 * (x[:half] + x[half:])
    mean = float(pairs.mean())
    se_mean = float(pairs.std(ddof=1) / math.sqrt(half))
    price = math.log(mean) / scale
    stderr = se_mean / (mean * scale)
    return price, stderr


def crr_claim_price(spec: LatticeSpec, payoff) -> tuple[float, float]:
    """Risk-neutral backward induction price and initial delta of a payoff on
    the terminal asset price; independent of the utility engine."""
    n = spec.n
    values = np.array(
        [payoff(spec.price(n, k)) for k in range(spec.levels(n))], dtype=float
    )
    layer1 = None
    for m in range(n - 1, -1, -1):
        nxt = np.empty(spec.levels(m))
        for k in range(spec.levels(m)):
            c = spec.coeffs(m, k)
            nxt[k] = (c.q * values[k + 1] + (1.0 - c.q) * values[k]) / c.R
        values = nxt
        if m == 1:
            layer1 = values.copy()
    price = float(values[0])
    if n == 0:
        return price, 0.0
    c0 = spec.coeffs(0, 0)
    if layer1 is None:  # n == 1: time-1 values are the payoffs themselves
        layer1 = np.array([payoff(spec.price(1, k)) for k in range(spec.levels(1))])
    delta = float((layer1[1] - layer1[0]) / (spec.s0 * (c0.u - c0.d)))
    return price, delta
