"""Utility indifference prices and hedge deltas.

Both quantities come from two solved surfaces: one for the plain investment
problem and one where the terminal utility is shifted by the claim payoff.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .dp import policy_at
from .hfunc import HFunc, PlateauExceededError


@dataclass(frozen=True)
class ClaimSpec:
    """Terminal payoff as a function of the terminal state (asset price or
    untradeable factor level)."""

    payoff: Callable[[float], float]
    on: str = "S"
    side: str = "seller"

    def __post_init__(self):
        if self.on not in ("S", "Y"):
            raise ValueError("claim must be written on 'S' or 'Y'")
        if self.side not in ("seller", "buyer"):
            raise ValueError("side must be 'seller' or 'buyer'")


def shift_terminal(U: HFunc, c: float) -> HFunc:
    """Terminal condition with a cash payment c at maturity: ``w -> U(w - c)``."""
    return U.shift(c)


def indifference_price(surface, surface_star, w: float) -> float:
    """Compensation that makes holding the claim utility-neutral at wealth w.

    ``surface`` solves the problem without the claim, ``surface_star`` the one
    whose terminal utility was shifted by the payoff (seller convention)."""
    v = surface.root.value
    v_star = surface_star.root.value
    target = v.evaluate(w)
    try:
        return v_star.invert(target) - w
    except PlateauExceededError as exc:
        raise PlateauExceededError(
            f"claim value unreachable at wealth {w}: no compensation attains the "
            f"claim-free utility level {target}"
        ) from exc


def hedge_delta(surface, surface_star, w: float, s0: float) -> float:
    """Initial stock position per unit of spot that hedges the claim.

    The with-claim policy is read at the compensated wealth ``w + price``."""
    pi = indifference_price(surface, surface_star, w)
    beta = policy_at(surface.root, w)
    beta_star = policy_at(surface_star.root, w + pi)
    return (beta_star - beta) / s0


def buyer_price_from_seller(seller_price_of_negated: float) -> float:
    """Buyer price of a payoff equals minus the seller price of its negation."""
    return -seller_price_of_negated
