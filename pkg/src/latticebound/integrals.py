"""Resolvent moments of the zero-fiber dispersion and their edge behavior.

Five scalar functions drive the whole bound-state analysis: the torus
averages of ``w(p) / (E0(p) - z)`` for the trigonometric weights

    a: 1      b: cos p1      c: cos^2 p1      e: cos p1 cos p2      f: sin^2 p1

where ``E0(p) = (1+gamma) * sum_i (1 - cos p_i)`` and z lies outside the
closed band ``[0, 4(1+gamma)]``.  The inner angle integrates in closed form,
leaving 1D integrals with an inverse-square-root boundary layer at the band
edge; those are handled with geometric panels and Gauss-Legendre pairs.

Near an edge the moments behave like ``s * (-+ln|z-edge|) + offset``; the
offsets are available in two flavors: a frozen ``PUBLISHED`` table and a
``COMPUTED`` table calibrated here by Richardson-style extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import CalibrationMissing, DomainError, ToleranceError

LN2 = math.log(2.0)
PI = math.pi


class Side(Enum):
    """Which side of the continuous band an energy lies on."""

    BELOW = "below"
    ABOVE = "above"


class ConstantsSource(Enum):
    """Which set of edge constants to use for predictions."""

    PUBLISHED = "published"
    COMPUTED = "computed"


@dataclass(frozen=True)
class IntegralSet:
    """The five resolvent moments at a common energy, with an error estimate."""

    a: float
    b: float
    c: float
    e: float
    f: float
    z: float
    est_error: float

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.e, self.f])


@dataclass(frozen=True)
class EdgeAsymptotics:
    """Edge model ``value = log_slope * (-+ln d) + offset`` at distance d.

    The log term is ``-ln d`` below the band and ``+ln d`` above, so a
    positive ``log_slope`` means divergence to +inf below and -inf above.
    """

    side: Side
    log_slope: float
    offset: float
    source: ConstantsSource

    def value_at(self, delta: float) -> float:
        ln = math.log(delta)
        return self.log_slope * (-ln if self.side is Side.BELOW else ln) + self.offset


# ---------------------------------------------------------------------------
# quadrature plumbing


@lru_cache(maxsize=None)
def _gl_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def geometric_panels(length: float, scale: float, hard_floor: float = 1e-280) -> np.ndarray:
    """Breakpoints on [0, length], halving toward the singular end at 0.

    ``scale`` is the width of the boundary layer; panels stop shrinking once
    they resolve it (about scale/8), or at ``hard_floor`` in desperate cases.
    """
    floor = max(min(scale / 8.0, length / 16.0), hard_floor, length * 2.0 ** -60)
    k = max(4, int(math.ceil(math.log2(length / floor))))
    bp = length * 2.0 ** (-np.arange(k + 1, dtype=float))
    return np.concatenate(([0.0], bp[::-1]))


def panel_nodes(breakpoints: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights for every panel, flattened."""
    x, w = _gl_nodes(n)
    lo = breakpoints[:-1][:, None]
    hi = breakpoints[1:][:, None]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights


# ---------------------------------------------------------------------------
# the reduced 1D integrals

_QUANTITIES = ("a", "b", "c", "e", "f")


def _reduced_values(x: np.ndarray, weights: np.ndarray, d: float, sgn: float) -> np.ndarray:
    """Evaluate the five reduced integrands at nodes x and sum.

    Works in units of the total hopping (g = 1): the caller rescales.  ``d``
    is the distance to the band edge in those units; ``sgn`` is +1 below the
    band, -1 above.  Both sides share |A| = 2 + d - cos x after folding the
    singularity to x = 0.
    """
    am1 = d + 2.0 * np.sin(0.5 * x) ** 2          # |A| - 1, no cancellation
    root = np.sqrt(am1 * (am1 + 2.0))             # sqrt(A^2 - 1)
    s0 = sgn / root
    t1 = 1.0 / (root * (am1 + 1.0 + root))        # inner cos moment, >= 0
    cx = np.cos(x)
    vals = np.empty(5)
    vals[0] = weights @ s0                        # a
    vals[1] = sgn * (weights @ (cx * s0))         # b   (cos p1 -> sgn*cos x)
    vals[2] = weights @ (cx * cx * s0)            # c
    vals[3] = sgn * (weights @ (cx * t1))         # e
    vals[4] = weights @ ((1.0 - cx * cx) * s0)    # f
    return vals / PI


def _reduced_integrals(side: Side, d: float, rel_tol: float) -> tuple[np.ndarray, float]:
    sgn = 1.0 if side is Side.BELOW else -1.0
    layer = math.sqrt(2.0 * d) if d < 2.0 else PI
    for level in range(3):
        bp = geometric_panels(PI, layer / 4.0 ** level)
        x1, w1 = panel_nodes(bp, 16 << level)
        x2, w2 = panel_nodes(bp, 32 << level)
        v1 = _reduced_values(x1, w1, d, sgn)
        v2 = _reduced_values(x2, w2, d, sgn)
        err = np.abs(v1 - v2)
        vmax = float(np.max(np.abs(v2)))
        tol = rel_tol * np.maximum(np.abs(v2), 1e-6 * vmax + 1e-300)
        if np.all(err <= tol):
            return v2, float(np.max(err))
    raise ToleranceError(
        f"resolvent moments at distance {d:.3e} ({side.value}): "
        f"error estimate {float(np.max(err)):.3e} exceeds requested tolerance"
    )


def _check_rel_tol(rel_tol: float) -> None:
    if not (rel_tol >= 1e-13):
        raise ValueError(f"rel_tol must be >= 1e-13, got {rel_tol}")


@lru_cache(maxsize=65536)
def watson_integrals_at(side: Side, delta: float, gamma: float,
                        rel_tol: float = 1e-10) -> IntegralSet:
    """Five moments at exact distance ``delta`` from the band edge.

    Preferred over :func:`watson_integrals` near the edges: the distance is
    taken literally instead of being reconstructed from z by subtraction (a
    difference that matters once delta approaches float granularity of the
    edge location).
    """
    _check_rel_tol(rel_tol)
    if not (delta > 0.0) or not math.isfinite(delta):
        raise DomainError(f"distance to the band edge must be positive, got {delta}")
    g = 1.0 + gamma
    vals, err = _reduced_integrals(side, delta / g, rel_tol)
    z = -delta if side is Side.BELOW else 4.0 * g + delta
    a, b, c, e, f = (vals / g).tolist()
    return IntegralSet(a=a, b=b, c=c, e=e, f=f, z=z, est_error=err / g)


def watson_integrals(z: float, gamma: float, rel_tol: float = 1e-10) -> IntegralSet:
    """Five moments at energy ``z`` outside the closed band [0, 4(1+gamma)].

    Raises DomainError for z inside the closed band (endpoints included) and
    ToleranceError when the panel quadrature cannot certify ``rel_tol``.
    """
    _check_rel_tol(rel_tol)
    g = 1.0 + gamma
    if z < 0.0:
        return watson_integrals_at(Side.BELOW, -z, gamma, rel_tol)
    if z > 4.0 * g:
        return watson_integrals_at(Side.ABOVE, z - 4.0 * g, gamma, rel_tol)
    raise DomainError(f"z = {z} lies inside the closed band [0, {4.0 * g}]")


def watson_integrals_grid(z: float, gamma: float, n: int = 256) -> IntegralSet:
    """Independent cross-check: plain 2D periodic-trapezoid moments.

    Spectrally accurate only when z is well separated from the band (use
    |z - edge| >= 0.05 or so); intended for validating the panel quadrature,
    not for production use near the edges.
    """
    g = 1.0 + gamma
    if 0.0 <= z <= 4.0 * g:
        raise DomainError(f"z = {z} lies inside the closed band [0, {4.0 * g}]")

    def moments(m: int) -> np.ndarray:
        q = -PI + 2.0 * PI * np.arange(m) / m
        p1, p2 = np.meshgrid(q, q, indexing="ij")
        den = g * ((1.0 - np.cos(p1)) + (1.0 - np.cos(p2))) - z
        inv = 1.0 / den
        c1 = np.cos(p1)
        return np.array([
            inv.mean(),
            (c1 * inv).mean(),
            (c1 * c1 * inv).mean(),
            (c1 * np.cos(p2) * inv).mean(),
            ((1.0 - c1 * c1) * inv).mean(),
        ])

    v = moments(n)
    err = float(np.max(np.abs(v - moments(n // 2))))
    a, b, c, e, f = v.tolist()
    return IntegralSet(a=a, b=b, c=c, e=e, f=f, z=z, est_error=err)


# ---------------------------------------------------------------------------
# edge constants


def published_asymptote(which: str, side: Side, gamma: float) -> EdgeAsymptotics:
    """The frozen reference table of edge constants."""
    g = 1.0 + gamma
    s = 1.0 / (2.0 * PI * g)
    offsets_below = {
        "a": 5.0 * LN2 * s,
        "b": (5.0 * LN2 - PI) * s,
        "c": (5.0 * LN2 - 3.0 * PI + 8.0) * s,
        "e": (5.0 * LN2 + PI - 8.0) * s,
        "f": (PI - 2.0) / (PI * g),
    }
    if which not in offsets_below:
        raise KeyError(f"unknown moment {which!r}")
    slope = 0.0 if which == "f" else s
    off = offsets_below[which]
    if side is Side.ABOVE:
        off = -off
    return EdgeAsymptotics(side=side, log_slope=slope, offset=off,
                           source=ConstantsSource.PUBLISHED)


CALIBRATION_DISTANCES = (1e-4, 1e-5, 1e-6, 1e-7)

_CALIBRATED: dict[float, dict[tuple[str, Side], EdgeAsymptotics]] = {}


def calibrate_edge_constants(gamma: float, rel_tol: float = 1e-12,
                             ) -> dict[tuple[str, Side], EdgeAsymptotics]:
    """Measure the edge models of all five moments on both sides.

    Fits ``v(d) = t*ln d + C0 + C1*d*ln d + C2*d`` through the four sampled
    distances (an exact 4x4 solve, i.e. extrapolation to the edge with the
    leading correction terms removed) and stores the result for
    :func:`predicted_asymptote`.  Returns the full table.
    """
    cached = _CALIBRATED.get(gamma)
    if cached is not None:
        return cached
    table: dict[tuple[str, Side], EdgeAsymptotics] = {}
    deltas = np.array(CALIBRATION_DISTANCES)
    ln = np.log(deltas)
    design = np.column_stack([ln, np.ones_like(deltas), deltas * ln, deltas])
    for side in (Side.BELOW, Side.ABOVE):
        sets = [watson_integrals_at(side, float(d), gamma, rel_tol) for d in deltas]
        data = np.array([s.as_array() for s in sets])          # (4 deltas, 5)
        coef = np.linalg.solve(design, data)                   # rows: t, C0, C1, C2
        for j, which in enumerate(_QUANTITIES):
            t, c0 = float(coef[0, j]), float(coef[1, j])
            slope = -t if side is Side.BELOW else t
            table[(which, side)] = EdgeAsymptotics(
                side=side, log_slope=slope, offset=c0,
                source=ConstantsSource.COMPUTED)
    _CALIBRATED[gamma] = table
    return table


def predicted_asymptote(which: str, side: Side, gamma: float,
                        source: ConstantsSource = ConstantsSource.COMPUTED,
                        ) -> EdgeAsymptotics:
    """Edge model of one moment, from either constants source.

    The COMPUTED source requires a prior :func:`calibrate_edge_constants`
    call for this gamma (CalibrationMissing otherwise).
    """
    if source is ConstantsSource.PUBLISHED:
        return published_asymptote(which, side, gamma)
    table = _CALIBRATED.get(gamma)
    if table is None:
        raise CalibrationMissing(
            f"no calibration for gamma = {gamma}; call calibrate_edge_constants")
    return table[(which, side)]


def ensure_calibrated(gamma: float) -> dict[tuple[str, Side], EdgeAsymptotics]:
    """Calibrate on demand (idempotent); used by the spectrum solver."""
    return calibrate_edge_constants(gamma)


def calibration_report(gamma: float) -> list[dict]:
    """Computed-vs-published comparison for every moment and side."""
    table = ensure_calibrated(gamma)
    rows = []
    for (which, side), comp in sorted(table.items(), key=lambda kv: (kv[0][0], kv[0][1].value)):
        pub = published_asymptote(which, side, gamma)
        rows.append({
            "which": which,
            "side": side.value,
            "computed_slope": comp.log_slope,
            "published_slope": pub.log_slope,
            "computed_offset": comp.offset,
            "published_offset": pub.offset,
            "offset_discrepancy": comp.offset - pub.offset,
            "slope_discrepancy": comp.log_slope - pub.log_slope,
        })
    return rows
