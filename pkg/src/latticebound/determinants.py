"""Secular matrix and determinant factors of the rank-5 interaction.

The interaction acts through five orthonormal trigonometric modes (constant,
two cosines, two sines) with channel weights (lam, mu/2, mu/2, mu/2, mu/2).
A bound state at energy z outside the band is a zero of

    det( I + G J(z) ),    J_ij(z) = <m_i, (E_K - z)^{-1} m_j>.

At zero fiber the matrix splits into even and odd blocks and the determinant
factors into a main even part, a sub-even part and a squared odd part.  At
general fiber the entries reduce to 1D integrals after rotating each angle
by the dispersion phase; the inner angle is integrated in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelParams, TorusPoint, edges_closed, pair_amplitudes
from .errors import DomainError, ToleranceError
from .integrals import (IntegralSet, Side, geometric_panels, panel_nodes,
                        watson_integrals, watson_integrals_at)

TWO_PI = 2.0 * math.pi
_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class InteractionBasis:
    """The five interaction modes and their channel weights."""

    @staticmethod
    def weights(params: ModelParams) -> np.ndarray:
        m = 0.5 * params.mu
        return np.array([params.lam, m, m, m, m])

    @staticmethod
    def modes(p1, p2) -> np.ndarray:
        """Mode values at (p1, p2); accepts arrays, returns shape (5, ...)."""
        p1 = np.asarray(p1, dtype=float)
        p2 = np.asarray(p2, dtype=float)
        n = 1.0 / TWO_PI
        return np.stack([
            np.full(np.broadcast(p1, p2).shape, n),
            _SQRT2 * n * np.cos(p1),
            _SQRT2 * n * np.cos(p2),
            _SQRT2 * n * np.sin(p1),
            _SQRT2 * n * np.sin(p2),
        ])

    @staticmethod
    def kernel(p1, p2, q1, q2, params: ModelParams) -> np.ndarray:
        """Difference kernel of the interaction, v(p - q)."""
        return (params.lam + params.mu * (np.cos(np.asarray(p1) - q1)
                                          + np.cos(np.asarray(p2) - q2))) / TWO_PI ** 2


# ---------------------------------------------------------------------------
# determinant factors at zero fiber


def _ints_for(z_or_set, params: ModelParams, rel_tol: float) -> IntegralSet:
    if isinstance(z_or_set, IntegralSet):
        return z_or_set
    return watson_integrals(float(z_or_set), params.gamma, rel_tol)


def delta_odd(z_or_set, params: ModelParams, rel_tol: float = 1e-10) -> float:
    """Odd-sector determinant factor (1 + mu*f)^2 at zero fiber."""
    s = _ints_for(z_or_set, params, rel_tol)
    return (1.0 + params.mu * s.f) ** 2


def delta_even_sub(z_or_set, params: ModelParams, rel_tol: float = 1e-10) -> float:
    """Antisymmetric-cosine even factor 1 + mu*(c - e) at zero fiber."""
    s = _ints_for(z_or_set, params, rel_tol)
    return 1.0 + params.mu * (s.c - s.e)


def delta_even_main(z_or_set, params: ModelParams, rel_tol: float = 1e-10) -> float:
    """Main even factor (1+lam*a)(1+mu*(c+e)) - 2*lam*mu*b^2 at zero fiber."""
    s = _ints_for(z_or_set, params, rel_tol)
    return ((1.0 + params.lam * s.a) * (1.0 + params.mu * (s.c + s.e))
            - 2.0 * params.lam * params.mu * s.b * s.b)


def slope_above(params: ModelParams) -> float:
    """Log-slope coefficient of the main even factor at the upper edge."""
    return 2.0 * params.mu + params.lam - params.lam * params.mu / params.g


def slope_below(params: ModelParams) -> float:
    """Log-slope coefficient of the main even factor at the lower edge."""
    return 2.0 * params.mu + params.lam + params.lam * params.mu / params.g


# ---------------------------------------------------------------------------
# secular matrix at general fiber


def _pair_coefficients(c1: float, s1: float, c2: float, s2: float) -> np.ndarray:
    """Reduction table: coefficients (x0, x1, x2, y0, y1, z0) per mode pair.

    Entry (i, j) expands m_i*m_j integrated over the inner angle into
    (x0 + x1*cq + x2*cq^2) * T0 + (y0 + y1*cq) * T1 + z0 * T2 with
    cq = cos of the rotated outer angle.  Only the upper triangle is stored.
    """
    r2 = _SQRT2
    tab = np.zeros((5, 5, 6))
    tab[0, 0] = (1, 0, 0, 0, 0, 0)
    tab[0, 1] = (0, r2 * c1, 0, 0, 0, 0)
    tab[0, 2] = (0, 0, 0, r2 * c2, 0, 0)
    tab[0, 3] = (0, r2 * s1, 0, 0, 0, 0)
    tab[0, 4] = (0, 0, 0, r2 * s2, 0, 0)
    tab[1, 1] = (2 * s1 * s1, 0, 2 * (c1 * c1 - s1 * s1), 0, 0, 0)
    tab[1, 2] = (0, 0, 0, 0, 2 * c1 * c2, 0)
    tab[1, 3] = (-2 * c1 * s1, 0, 4 * c1 * s1, 0, 0, 0)
    tab[1, 4] = (0, 0, 0, 0, 2 * c1 * s2, 0)
    tab[2, 2] = (2 * s2 * s2, 0, 0, 0, 0, 2 * (c2 * c2 - s2 * s2))
    tab[2, 3] = (0, 0, 0, 0, 2 * c2 * s1, 0)
    tab[2, 4] = (-2 * c2 * s2, 0, 0, 0, 0, 4 * c2 * s2)
    tab[3, 3] = (2 * c1 * c1, 0, 2 * (s1 * s1 - c1 * c1), 0, 0, 0)
    tab[3, 4] = (0, 0, 0, 0, 2 * s1 * s2, 0)
    tab[4, 4] = (2 * c2 * c2, 0, 0, 0, 0, 2 * (s2 * s2 - c2 * c2))
    return tab


def _entries_from_nodes(x: np.ndarray, w: np.ndarray, delta: float, r1: float,
                        r2: float, sgn: float, tab: np.ndarray) -> np.ndarray:
    """Evaluate all 15 reduced entries on one node set.

    The outer angle is folded so the near-edge layer sits at x = 0 on both
    sides; ``sgn`` is +1 below the band, -1 above (it flips the odd-in-cos
    coefficients and the overall resolvent sign).
    """
    m = delta + 2.0 * r1 * np.sin(0.5 * x) ** 2    # |A| - R2, stable
    amag = m + r2                                   # |A|
    root = np.sqrt(m * (m + 2.0 * r2))              # sqrt(A^2 - R2^2)
    denom = root * (amag + root)
    t1 = r2 / denom
    t2 = sgn * amag / denom
    ts = sgn / (amag + root)                        # T0 - T2, stable
    cq = sgn * np.cos(x)                            # rotated cos of outer angle
    out = np.empty((5, 5))
    for i in range(5):
        for j in range(i, 5):
            x0, x1c, x2c, y0, y1c, z0 = tab[i, j]
            p = x0 + x1c * cq + x2c * cq * cq
            q = y0 + y1c * cq
            val = w @ ((p + z0) * t2 + p * ts + q * t1)
            out[i, j] = out[j, i] = val / math.pi
    return out


def secular_entries(z: float, K: TorusPoint, params: ModelParams,
                    rel_tol: float = 1e-10, *, side: Side | None = None,
                    delta: float | None = None) -> tuple[np.ndarray, float]:
    """Resolvent Gram matrix J(z) of the five modes at fiber K.

    Either pass z directly, or (side, delta) for an exact distance to the
    band edge.  Returns (J, est_error).
    """
    g = params.g
    r1, r2, f1, f2 = pair_amplitudes(K, params.gamma)
    lo, hi = edges_closed(K, params)
    if delta is None:
        if z < lo:
            side, delta = Side.BELOW, lo - z
        elif z > hi:
            side, delta = Side.ABOVE, z - hi
        else:
            raise DomainError(f"z = {z} lies inside the closed band [{lo}, {hi}]")
    sgn = 1.0 if side is Side.BELOW else -1.0
    # Order the two angles so the outer one carries the larger amplitude;
    # swapping angles permutes modes (1<->2, 3<->4).
    perm = None
    if r2 > r1:
        r1, r2, f1, f2 = r2, r1, f2, f1
        perm = [0, 2, 1, 4, 3]
    tab = _pair_coefficients(math.cos(f1), math.sin(f1), math.cos(f2), math.sin(f2))
    layer = math.sqrt(2.0 * delta / r1) if r1 > delta else math.pi
    for level in range(3):
        bp = geometric_panels(math.pi, min(layer, math.pi) / 4.0 ** level)
        x1, w1 = panel_nodes(bp, 16 << level)
        x2, w2 = panel_nodes(bp, 32 << level)
        j1 = _entries_from_nodes(x1, w1, delta, r1, r2, sgn, tab)
        j2 = _entries_from_nodes(x2, w2, delta, r1, r2, sgn, tab)
        err = float(np.max(np.abs(j1 - j2)))
        scale = float(np.max(np.abs(j2)))
        if err <= rel_tol * max(scale, 1e-300):
            if perm is not None:
                j2 = j2[np.ix_(perm, perm)]
            return j2, err
    raise ToleranceError(
        f"secular entries at K={K.as_tuple()}, distance {delta:.3e}: "
        f"error estimate {err:.3e} exceeds requested tolerance")


@dataclass(frozen=True)
class SecularMatrix:
    """The 5x5 matrix I + G J(z) whose zero set is the discrete spectrum."""

    z: float
    K: TorusPoint
    entries: np.ndarray
    det: float


def secular_matrix(z: float, K: TorusPoint, params: ModelParams,
                   rel_tol: float = 1e-10) -> SecularMatrix:
    """Assemble I + G J(z) at fiber K and evaluate its determinant.

    Zero fiber takes the fast path through the five scalar moments; the
    determinant comes from LAPACK's pivoted LU factorization.
    """
    if K.p1 == 0.0 and K.p2 == 0.0:
        s = watson_integrals(z, params.gamma, rel_tol)
        b2 = _SQRT2 * s.b
        j = np.array([
            [s.a, b2, b2, 0.0, 0.0],
            [b2, 2 * s.c, 2 * s.e, 0.0, 0.0],
            [b2, 2 * s.e, 2 * s.c, 0.0, 0.0],
            [0.0, 0.0, 0.0, 2 * s.f, 0.0],
            [0.0, 0.0, 0.0, 0.0, 2 * s.f],
        ])
    else:
        j, _ = secular_entries(z, K, params, rel_tol)
    m = np.eye(5) + InteractionBasis.weights(params)[:, None] * j
    return SecularMatrix(z=z, K=K, entries=m, det=float(np.linalg.det(m)))
