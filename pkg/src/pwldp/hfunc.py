"""Piecewise-linear concave functions that flatten out to the right.

Every function here is increasing, concave, linear between a finite set of
kinks and constant beyond the last kink.  It is fully described by the kink
positions ``xs``, the values ``vs`` there and the slope to the left of the
first kink.  This family is closed under nonnegative linear combination and
under the one-step backward induction in :mod:`pwldp.dp`, which is what makes
the whole solver exact.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence, Tuple

import numpy as np

from .kernels import prune_keep_mask

#: absolute/relative tolerance for merging kink positions
X_MERGE_RTOL = 1e-12
#: relative tolerance below which a slope change does not count as a kink
SLOPE_RTOL = 1e-12


class InvalidHFuncError(ValueError):
    """Raised when kink data violates increase/concavity/plateau structure."""


class PlateauExceededError(ValueError):
    """Raised when inverting above the function's constant tail value."""


class InvalidUtilityError(ValueError):
    """Raised when sampled utility values are not strictly concave increasing."""


class HFunc:
    """Immutable piecewise-linear concave increasing function with a plateau.

    Parameters
    ----------
    xs, vs:
        kink positions (strictly increasing) and function values there.
    slope_left:
        derivative left of ``xs[0]``; must exceed the first segment slope.
    """

    __slots__ = ("xs", "vs", "slope_left", "_seg")

    def __init__(self, xs, vs, slope_left: float, validate: bool = True):
        xs = np.ascontiguousarray(xs, dtype=np.float64)
        vs = np.ascontiguousarray(vs, dtype=np.float64)
        slope_left = float(slope_left)
        if xs.ndim != 1 or xs.shape != vs.shape or xs.size == 0:
            raise InvalidHFuncError("xs and vs must be equal-length 1-d arrays")
        seg = np.diff(vs) / np.diff(xs) if xs.size > 1 else np.empty(0)
        if validate:
            if not np.all(np.diff(xs) > 0):
                raise InvalidHFuncError("kink positions must be strictly increasing")
            if not np.isfinite(slope_left) or slope_left <= 0:
                raise InvalidHFuncError("left slope must be positive and finite")
            chain = np.concatenate(([slope_left], seg))
            if not np.all(np.diff(chain) < 0):
                raise InvalidHFuncError("slopes must strictly decrease at every kink")
            if seg.size and seg[-1] <= 0:
                raise InvalidHFuncError("segment slopes must stay positive before the plateau")
        xs.setflags(write=False)
        vs.setflags(write=False)
        self.xs = xs
        self.vs = vs
        self.slope_left = slope_left
        self._seg = seg

    # -- basic queries ---------------------------------------------------

    @property
    def n(self) -> int:
        return self.xs.size

    @property
    def segment_slopes(self) -> np.ndarray:
        """Slopes of the N-1 finite segments between kinks."""
        return self._seg

    @property
    def left_slopes(self) -> np.ndarray:
        """Left derivative at each kink: ``[slope_left, seg_1, ..., seg_{N-1}]``."""
        return np.concatenate(([self.slope_left], self._seg))

    def __call__(self, x):
        return self.evaluate(x)

    def evaluate(self, x):
        """Exact evaluation; linear left of the first kink, constant beyond the last."""
        x = np.asarray(x, dtype=np.float64)
        out = np.interp(x, self.xs, self.vs)
        left = x < self.xs[0]
        if np.any(left):
            out = np.where(left, self.vs[0] + self.slope_left * (x - self.xs[0]), out)
        return out if out.ndim else float(out)

    def left_slope_at(self, k: int) -> float:
        """Left derivative at the k-th kink (1-based, as counted from the left)."""
        if not 1 <= k <= self.n:
            raise IndexError(f"kink index {k} out of range 1..{self.n}")
        return self.slope_left if k == 1 else float(self._seg[k - 2])

    def invert(self, y: float) -> float:
        """Preimage of ``y`` on the strictly increasing part (smallest preimage)."""
        top = self.vs[-1]
        if y > top:
            raise PlateauExceededError(
                f"target value {y} exceeds plateau level {top}"
            )
        if y >= top:
            return float(self.xs[-1])
        if y <= self.vs[0]:
            return float(self.xs[0] + (y - self.vs[0]) / self.slope_left)
        k = int(np.searchsorted(self.vs, y))  # vs strictly increasing
        return float(self.xs[k - 1] + (y - self.vs[k - 1]) / self._seg[k - 1])

    def shift(self, c: float) -> "HFunc":
        """The function ``w -> f(w - c)``."""
        return HFunc(self.xs + c, self.vs, self.slope_left, validate=False)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "xs": self.xs.tolist(),
            "vs": self.vs.tolist(),
            "slope_left": self.slope_left,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HFunc":
        return cls(d["xs"], d["vs"], d["slope_left"])

    def __repr__(self) -> str:
        return f"HFunc(n={self.n}, span=[{self.xs[0]:g}, {self.xs[-1]:g}])"


def clean_points(xs, vs, slope_left: float) -> HFunc:
    """Build an HFunc from raw kink data, merging near-duplicate positions and
    dropping points where the slope does not actually decrease."""
    xs = np.asarray(xs, dtype=np.float64)
    vs = np.asarray(vs, dtype=np.float64)
    if xs.size == 0:
        raise InvalidHFuncError("no kink points supplied")
    order = np.argsort(xs, kind="stable")
    xs = xs[order]
    vs = vs[order]
    # merge positions closer than the float-noise scale; keep the left one
    if xs.size > 1:
        tol = X_MERGE_RTOL * np.maximum(1.0, np.abs(xs[:-1]))
        keep = np.concatenate(([True], np.diff(xs) > tol))
        xs = xs[keep]
        vs = vs[keep]
    # drop non-singular points (left and right slopes agree); slope past the
    # last kink is zero by the plateau convention
    while True:
        if xs.size == 1:
            break
        seg = np.diff(vs) / np.diff(xs)
        chain = np.concatenate(([slope_left], seg, [0.0]))
        drop = chain[:-1] - chain[1:] <= SLOPE_RTOL * np.maximum(1.0, np.abs(chain[:-1]))
        if not np.any(drop):
            break
        first = int(np.argmax(drop))
        xs = np.delete(xs, first)
        vs = np.delete(vs, first)
    return HFunc(xs, vs, slope_left)


def conic_combine(terms: Iterable[Tuple[float, HFunc]]) -> HFunc:
    """Nonnegative linear combination ``sum(w_i * f_i)``; stays in the class."""
    terms = [(float(w), f) for w, f in terms]
    if not terms:
        raise ValueError("conic_combine needs at least one term")
    if any(w < 0 for w, _ in terms):
        raise ValueError("weights must be nonnegative")
    active = [(w, f) for w, f in terms if w > 0]
    if not active:
        raise ValueError("at least one weight must be strictly positive")
    xs = np.unique(np.concatenate([f.xs for _, f in active]))
    vs = np.zeros_like(xs)
    slope_left = 0.0
    for w, f in active:
        vs += w * f.evaluate(xs)
        slope_left += w * f.slope_left
    return clean_points(xs, vs, slope_left)


def prune(f: HFunc, eps: float) -> HFunc:
    """Sup-norm-bounded simplification: returns g with kinks a subset of f's,
    first and last kinks retained, and ``sup |f - g| <= eps``."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if f.n <= 2:
        return f
    mask = prune_keep_mask(f.xs, f.vs, f._seg, float(eps))
    mask = np.asarray(mask, dtype=bool)
    if mask.all():
        return f
    return HFunc(f.xs[mask], f.vs[mask], f.slope_left, validate=False)


def approximate_utility(
    u_eval: Callable,
    w_min: float,
    w_max: float,
    n_points: int,
    slope_left: float | None = None,
) -> HFunc:
    """Sample a concave increasing utility at equidistant points and flatten it
    beyond ``w_max``.

    The leftmost slope defaults to a one-sided finite difference just left of
    ``w_min`` with step ``(w_max - w_min) / (10 * n_points)``.
    """
    if n_points < 2:
        raise ValueError("need at least two sample points")
    xs = np.linspace(w_min, w_max, n_points)
    try:
        vs = np.asarray(u_eval(xs), dtype=np.float64)
        if vs.shape != xs.shape:
            raise TypeError
    except TypeError:
        vs = np.array([float(u_eval(x)) for x in xs])
    if not np.all(np.isfinite(vs)):
        raise InvalidUtilityError("utility evaluates to non-finite values on the interval")
    seg = np.diff(vs) / np.diff(xs)
    if not (np.all(np.diff(seg) < 0) and np.all(seg > 0)):
        raise InvalidUtilityError(
            "sampled values are not strictly concave increasing on the interval"
        )
    if slope_left is None:
        h = (w_max - w_min) / (10.0 * n_points)
        slope_left = (float(np.asarray(u_eval(xs[0]))) - float(np.asarray(u_eval(xs[0] - h)))) / h
    slope_left = float(slope_left)
    if slope_left <= seg[0]:
        raise InvalidUtilityError("left slope does not exceed the first segment slope")
    return HFunc(xs, vs, slope_left)
