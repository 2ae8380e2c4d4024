"""Cubic B-spline bases over quantile-level grids.

Bases are clamped (boundary knots repeated four times) and evaluated by the
Cox-de Boor recursion; second derivatives come from the analytic derivative
recursion rather than finite differences.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

ORDER = 4  # cubic


@dataclass(frozen=True)
class SplineBasis:
    """Basis values and second derivatives on a level grid.

    phi[l, k] = phi_k(levels[l]); rows sum to one (partition of unity).
    phi_dd holds the analytic second derivatives on the same grid.
    """

    levels: np.ndarray  # (L,)
    knots: np.ndarray  # full clamped knot vector
    K: int
    phi: np.ndarray  # (L, K)
    phi_dd: np.ndarray  # (L, K)


def interior_knot_count(L, max_knots=None):
    """Interior knot count: all-but-edge levels for small grids, else
    ceil(2.5 * L**0.4) sites.  An explicit max_knots requests exactly
    min(max_knots, L - 4) interior knots instead."""
    if max_knots is not None:
        return max(min(int(max_knots), L - 4), 0)
    rule = L - 4 if L <= 50 else math.ceil(2.5 * L**0.4)
    return max(rule, 0)


def build_spline_basis(levels, max_knots=None):
    """Construct the clamped cubic basis for a strictly increasing grid.

    For L <= 50 the interior knots are the levels themselves with the two
    sites nearest each boundary dropped, which makes K equal L and the
    collocation matrix invertible.  Larger grids get ceil(2.5 * L**0.4)
    interior knots at equally spaced quantiles of the level sequence.
    max_knots caps the interior-knot count (so K <= max_knots + 4).
    """
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size < 4:
        raise ValidationError("need at least 4 quantile levels")
    if np.any(np.diff(levels) <= 0):
        raise ValidationError("levels must be strictly increasing")
    if levels[0] <= 0.0 or levels[-1] >= 1.0:
        raise ValidationError("levels must lie strictly inside (0,1)")
    L = levels.size
    m = interior_knot_count(L, max_knots)
    if m == L - 4:
        interior = levels[2 : L - 2]
    else:
        probs = np.arange(1, m + 1) / (m + 1)
        interior = np.quantile(levels, probs)
    a, b = levels[0], levels[-1]
    knots = np.concatenate([np.full(ORDER, a), interior, np.full(ORDER, b)])
    K = knots.size - ORDER
    phi = _basis_matrix(levels, knots)
    phi_dd = _second_derivative_matrix(levels, knots)
    return SplineBasis(levels=levels, knots=knots, K=K, phi=phi, phi_dd=phi_dd)


def _order1_indicators(x, knots):
    """Indicator functions of the knot intervals; right end closed."""
    nfun = knots.size - 1
    B = np.zeros((x.size, nfun))
    for i in range(nfun):
        if knots[i + 1] > knots[i]:
            B[:, i] = (x >= knots[i]) & (x < knots[i + 1])
    # points at the right boundary belong to the last non-empty interval
    at_end = x == knots[-1]
    if np.any(at_end):
        last = np.flatnonzero(np.diff(knots) > 0)[-1]
        B[at_end, last] = 1.0
    return B


def _raise_order(B, x, knots, k):
    """One Cox-de Boor step from order k-1 to order k."""
    nfun = knots.size - k
    out = np.zeros((x.size, nfun))
    for i in range(nfun):
        d1 = knots[i + k - 1] - knots[i]
        d2 = knots[i + k] - knots[i + 1]
        term = 0.0
        if d1 > 0:
            term = (x - knots[i]) / d1 * B[:, i]
        if d2 > 0:
            term = term + (knots[i + k] - x) / d2 * B[:, i + 1]
        out[:, i] = term
    return out


def _basis_matrix(x, knots, order=ORDER):
    x = np.asarray(x, dtype=float)
    B = _order1_indicators(x, knots)
    for k in range(2, order + 1):
        B = _raise_order(B, x, knots, k)
    return B


def _derivative_coeffs(B, knots, k):
    """d/dx of order-k basis from order-(k-1) values:
    (k-1) * (B_{i,k-1}/(t_{i+k-1}-t_i) - B_{i+1,k-1}/(t_{i+k}-t_{i+1}))."""
    nfun = knots.size - k
    out = np.zeros((B.shape[0], nfun))
    for i in range(nfun):
        d1 = knots[i + k - 1] - knots[i]
        d2 = knots[i + k] - knots[i + 1]
        term = 0.0
        if d1 > 0:
            term = B[:, i] / d1
        if d2 > 0:
            term = term - B[:, i + 1] / d2
        out[:, i] = (k - 1) * term
    return out


def _second_derivative_matrix(x, knots, order=ORDER):
    x = np.asarray(x, dtype=float)
    B2 = _basis_matrix(x, knots, order=order - 2)
    D3 = _derivative_coeffs(B2, knots, order - 1)
    return _derivative_coeffs(D3, knots, order)
