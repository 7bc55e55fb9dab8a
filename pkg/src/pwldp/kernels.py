"""Hot inner loops, numba-compiled by default.

Set the environment variable ``PWLDP_DISABLE_NUMBA=1`` before import to run the
same functions as plain Python/numpy (useful for debugging and as a portability
fallback; see ``benchmarks/bench_kernels.py`` for the speed difference).
"""

import os

import numpy as np

_TIE_RTOL = 1e-12


def _numba_enabled() -> bool:
    if os.environ.get("PWLDP_DISABLE_NUMBA", "") == "1":
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _numba_enabled()


def _maybe_jit(fn):
    if not USE_NUMBA:
        return fn
    import numba

    return numba.njit(cache=True, nogil=True, fastmath=False)(fn)


def _backstep_core(xu, vu, zu, xd, vd, zd, p, q, u, d, R):
    """One-step backward recursion over grid intersections.

    Inputs are the successor kink positions, values and left slopes (zu[0] is
    the leftmost slope, zu[k] the slope of the segment ending at xu[k]).
    Emits the predecessor's kinks in decreasing wealth order together with the
    optimal investment at each kink and the line carrying the policy below the
    smallest kink.

    Returns (xs, vs, zs, betas, count, ray_on_u, ray_x) where the first four
    arrays are filled up to ``count`` and in reverse (decreasing x) order.
    ``ray_on_u == 1`` means the left policy ray follows the up-successor line
    through ``ray_x``; otherwise it follows the down-successor line.
    """
    nu = xu.shape[0]
    nd = xd.shape[0]
    cap = nu + nd - 1
    xs = np.empty(cap)
    vs = np.empty(cap)
    zs = np.empty(cap)
    betas = np.empty(cap)

    i = nu - 1
    j = nd - 1
    v_prev = (p * vu[nu - 1] + (1.0 - p) * vd[nd - 1]) / R
    z_prev = 0.0
    x_prev = 0.0
    k = 0
    cu = p / q
    cd = (1.0 - p) / (1.0 - q)
    ray_on_u = 0
    ray_x = 0.0
    while True:
        x = (q * xu[i] + (1.0 - q) * xd[j]) / R
        beta = (xu[i] - xd[j]) / (u - d)
        z_u = cu * zu[i]
        z_d = cd * zd[j]
        z = min(z_u, z_d)
        v = v_prev - z_prev * (x_prev - x)
        xs[k] = x
        vs[k] = v
        zs[k] = z
        betas[k] = beta
        k += 1
        x_prev = x
        v_prev = v
        z_prev = z

        big = abs(z_u)
        if abs(z_d) > big:
            big = abs(z_d)
        tie = abs(z_u - z_d) <= _TIE_RTOL * big
        if tie:
            # both successor kinks are crossed at once; the flat argmax below
            # is resolved by the minimal-investment convention (down line)
            ray_on_u = 0
            ray_x = xd[j]
            i -= 1
            j -= 1
        elif z_u < z_d:
            ray_on_u = 0
            ray_x = xd[j]
            i -= 1
        else:
            ray_on_u = 1
            ray_x = xu[i]
            j -= 1
        if i < 0 or j < 0:
            break
    return xs, vs, zs, betas, k, ray_on_u, ray_x


def _prune_keep_mask(xs, vs, seg, eps):
    """Greedy left-to-right chord simplification keep-mask.

    ``seg[k]`` is the slope of the segment from kink k to k+1 (length N-1,
    strictly decreasing for a concave input).  A kink survives if removing it
    would move the function by more than ``eps`` in sup norm on the chord
    spanning its neighbours.  First and last kinks always survive.
    """
    n = xs.shape[0]
    keep = np.zeros(n, dtype=np.bool_)
    keep[0] = True
    keep[n - 1] = True
    a = 0
    while a < n - 1:
        # largest endpoint e with chord deviation <= eps; deviation is
        # nondecreasing in e by concavity, so bisect
        lo = a + 1  # always feasible (zero deviation)
        hi = n - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            c = (vs[mid] - vs[a]) / (xs[mid] - xs[a])
            # interior kink with the largest gap: last m with seg slope > c
            mlo = a + 1
            mhi = mid - 1
            m = a
            while mlo <= mhi:
                mm = (mlo + mhi) // 2
                if seg[mm - 1] > c:
                    m = mm
                    mlo = mm + 1
                else:
                    mhi = mm - 1
            if m == a:
                dev = 0.0
            else:
                dev = vs[m] - (vs[a] + c * (xs[m] - xs[a]))
            if dev <= eps:
                lo = mid
            else:
                hi = mid - 1
        keep[lo] = True
        a = lo
    return keep


backstep_core = _maybe_jit(_backstep_core)
prune_keep_mask = _maybe_jit(_prune_keep_mask)
