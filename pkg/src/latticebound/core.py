"""Kinematics of the two-particle lattice problem on the 2-torus.

The relative-motion fiber Hamiltonian at total quasi-momentum ``K`` acts on
L2 of the torus as multiplication by a dispersion ``E_K(p)`` plus a rank-5
trigonometric interaction (see :mod:`latticebound.determinants`).  This module
holds the dispersion itself, its band extrema, and the interaction symbol.

All angles live on ``[-pi, pi)``; :func:`wrap` is the canonical representative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap(x: float) -> float:
    """Reduce an angle to the half-open interval [-pi, pi).

    The positive endpoint maps to the negative one, so every equivalence
    class has exactly one representative.
    """
    return x - TWO_PI * math.floor(x / TWO_PI + 0.5)


@dataclass(frozen=True)
class TorusPoint:
    """A point on the 2-torus, stored in canonical coordinates."""

    p1: float
    p2: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p1", wrap(float(self.p1)))
        object.__setattr__(self, "p2", wrap(float(self.p2)))

    def as_tuple(self) -> tuple[float, float]:
        return (self.p1, self.p2)

    def __neg__(self) -> "TorusPoint":
        return TorusPoint(-self.p1, -self.p2)

    def __sub__(self, other: "TorusPoint") -> "TorusPoint":
        return TorusPoint(self.p1 - other.p1, self.p2 - other.p2)


ORIGIN = TorusPoint(0.0, 0.0)


@dataclass(frozen=True)
class ModelParams:
    """Couplings of the model.

    ``gamma`` is the mass ratio entering the second particle's hopping
    (must be positive); ``lam`` weights the on-site interaction and ``mu``
    the nearest-neighbour one.
    """

    gamma: float = 1.0
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not (self.gamma > 0.0) or not math.isfinite(self.gamma):
            raise ValueError(f"gamma must be a positive real, got {self.gamma}")
        for name in ("lam", "mu"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")

    @property
    def g(self) -> float:
        """Total inverse-mass scale 1 + gamma."""
        return 1.0 + self.gamma


def epsilon(p: TorusPoint) -> float:
    """Single-particle dispersion: sum_i (1 - cos p_i)."""
    return (1.0 - math.cos(p.p1)) + (1.0 - math.cos(p.p2))


def dispersion(K: TorusPoint, p: TorusPoint, params: ModelParams) -> float:
    """Two-particle kinetic symbol eps(p) + gamma*eps(K-p) at fiber K."""
    return epsilon(p) + params.gamma * epsilon(K - p)


def potential_symbol(p: TorusPoint, params: ModelParams) -> float:
    """Fourier symbol of the interaction: lam + mu*(cos p1 + cos p2)."""
    return params.lam + params.mu * (math.cos(p.p1) + math.cos(p.p2))


def pair_amplitudes(K: TorusPoint, gamma: float) -> tuple[float, float, float, float]:
    """Amplitude/phase form of the dispersion.

    Writing E_K(p) = 2(1+gamma) - R1*cos(p1-phi1) - R2*cos(p2-phi2), returns
    (R1, R2, phi1, phi2) with R_i = sqrt(1 + gamma^2 + 2*gamma*cos K_i) and
    phi_i = atan2(gamma*sin K_i, 1 + gamma*cos K_i).  R_i vanishes only at
    gamma = 1, K_i = pi.
    """
    out = []
    for k in (K.p1, K.p2):
        r = math.sqrt(max(1.0 + gamma * gamma + 2.0 * gamma * math.cos(k), 0.0))
        phi = math.atan2(gamma * math.sin(k), 1.0 + gamma * math.cos(k))
        out.append((r, phi))
    (r1, f1), (r2, f2) = out
    return r1, r2, f1, f2


def edges_closed(K: TorusPoint, params: ModelParams) -> tuple[float, float]:
    """Band endpoints from the amplitude form: sum_i (g -/+ R_i)."""
    g = params.g
    r1, r2, _, _ = pair_amplitudes(K, params.gamma)
    return (g - r1) + (g - r2), (g + r1) + (g + r2)


@dataclass(frozen=True)
class Band:
    """Extrema of the dispersion over the torus at a fixed fiber."""

    e_min: float
    e_max: float
    argmin: TorusPoint
    argmax: TorusPoint

    @property
    def width(self) -> float:
        return self.e_max - self.e_min

    @property
    def degenerate(self) -> bool:
        """True when the dispersion is constant (flat fiber)."""
        return self.width <= 1e-12 * (1.0 + abs(self.e_max))


def _dispersion_grid(K: TorusPoint, params: ModelParams, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    q = -np.pi + TWO_PI * np.arange(n) / n
    P1, P2 = np.meshgrid(q, q, indexing="ij")
    E = ((1.0 - np.cos(P1)) + (1.0 - np.cos(P2))
         + params.gamma * ((1.0 - np.cos(K.p1 - P1)) + (1.0 - np.cos(K.p2 - P2))))
    return P1, P2, E


def _newton_extremum(p0: tuple[float, float], sign: float, r: tuple[float, float],
                     phi: tuple[float, float]) -> tuple[float, float]:
    # Minimize sign*E.  Gradient components R_i*sin(p_i - phi_i) decouple,
    # so Newton runs per-coordinate; flat coordinates (R_i ~ 0) stay put.
    p = list(p0)
    for i in range(2):
        if r[i] < 1e-13:
            continue
        x = p[i]
        for _ in range(60):
            grad = sign * r[i] * math.sin(x - phi[i])
            hess = sign * r[i] * math.cos(x - phi[i])
            if abs(hess) < 1e-14:
                break
            step = grad / hess
            x -= step
            if abs(step) < 1e-15:
                break
        p[i] = x
    return p[0], p[1]


def band_edges(K: TorusPoint, params: ModelParams, grid: int = 64) -> Band:
    """Locate the band extrema by coarse grid search plus Newton refinement.

    The grid contains the high-symmetry points, so at K = (0,0) the result is
    exactly [0, 4*(1+gamma)].  The refined stationary points have gradient
    residual below 1e-10 (they are exact up to rounding: the coordinates
    decouple in the amplitude form).
    """
    P1, P2, E = _dispersion_grid(K, params, grid)
    r1, r2, f1, f2 = pair_amplitudes(K, params.gamma)

    imin = np.unravel_index(int(np.argmin(E)), E.shape)
    imax = np.unravel_index(int(np.argmax(E)), E.shape)
    pmin = _newton_extremum((float(P1[imin]), float(P2[imin])), +1.0, (r1, r2), (f1, f2))
    pmax = _newton_extremum((float(P1[imax]), float(P2[imax])), -1.0, (r1, r2), (f1, f2))

    argmin = TorusPoint(*pmin)
    argmax = TorusPoint(*pmax)
    e_min = dispersion(K, argmin, params)
    e_max = dispersion(K, argmax, params)
    # Snap to the closed-form endpoints when the refinement agrees with them;
    # this keeps e.g. the K = 0 band exactly [0, 4*(1+gamma)].
    lo, hi = edges_closed(K, params)
    if abs(e_min - lo) <= 1e-9 * (1.0 + abs(lo)):
        e_min = lo
    if abs(e_max - hi) <= 1e-9 * (1.0 + abs(hi)):
        e_max = hi
    return Band(e_min=e_min, e_max=e_max, argmin=argmin, argmax=argmax)


def gradient_norm(K: TorusPoint, p: TorusPoint, params: ModelParams) -> float:
    """Euclidean norm of grad_p E_K(p); used to check stationarity."""
    g1 = math.sin(p.p1) - params.gamma * math.sin(K.p1 - p.p1)
    g2 = math.sin(p.p2) - params.gamma * math.sin(K.p2 - p.p2)
    return math.hypot(g1, g2)
