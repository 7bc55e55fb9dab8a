"""Exact dynamic programming for optimal investment on binomial lattices.

Value functions are kept piecewise linear and concave throughout the backward
induction, so every step is exact up to floating point; an optional sup-norm
pruning step trades a bounded error for speed.  Multi-factor markets
(a correlated untradeable factor, or square-root stochastic volatility) reduce
to the same one-step kernel, and utility indifference prices follow from two
solved trees.
"""

from .hfunc import (
    HFunc,
    InvalidHFuncError,
    InvalidUtilityError,
    PlateauExceededError,
    approximate_utility,
    clean_points,
    conic_combine,
    prune,
)
from .lattice import (
    InvalidLatticeError,
    LatticeSpec,
    NodeCoeffs,
    crr_spec,
    probabilities,
    table_spec,
)
from .dp import (
    StepInputs,
    StepResult,
    ValueSurface,
    backstep,
    policy_at,
    solve,
)
from .multifactor import (
    DegenerateSplitError,
    HestonSpec,
    HestonSurface,
    TwoFactorGBMSpec,
    TwoFactorLattice,
    TwoFactorSurface,
    bilinear_weights,
    correlated_lattice,
    heston_grids,
    mix_successors,
    solve_heston,
    solve_two_factor,
)
from .pricing import (
    ClaimSpec,
    buyer_price_from_seller,
    hedge_delta,
    indifference_price,
    shift_terminal,
)
from . import oracle

__version__ = "0.1.0"

__all__ = [
    "HFunc",
    "InvalidHFuncError",
    "InvalidUtilityError",
    "PlateauExceededError",
    "approximate_utility",
    "clean_points",
    "conic_combine",
    "prune",
    "InvalidLatticeError",
    "LatticeSpec",
    "NodeCoeffs",
    "crr_spec",
    "probabilities",
    "table_spec",
    "StepInputs",
    "StepResult",
    "ValueSurface",
    "backstep",
    "policy_at",
    "solve",
    "DegenerateSplitError",
    "HestonSpec",
    "HestonSurface",
    "TwoFactorGBMSpec",
    "TwoFactorLattice",
    "TwoFactorSurface",
    "bilinear_weights",
    "correlated_lattice",
    "heston_grids",
    "mix_successors",
    "solve_heston",
    "solve_two_factor",
    "ClaimSpec",
    "buyer_price_from_seller",
    "hedge_delta",
    "indifference_price",
    "shift_terminal",
    "oracle",
]
