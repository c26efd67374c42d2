"""Discrete spectrum of the fiber operators outside the continuous band.

Zero fiber: the determinant factors (main even, sub-even, odd) are scanned on
an edge-refined mesh and bracketed roots are polished by Brent's method.  The
mesh bottoms out at distance 1e-10 from the band edge; whether one more root
hides between the mesh floor and the edge is decided from the asymptotic edge
models (the log-divergent factors can pin roots at distances like exp(-1/s)
that no fixed mesh reaches).  Such roots are reported with ``pinned=True`` at
the model position, clamped away from the edge by at least 1e-13.

General fiber: the determinant loses its product structure, so roots are
counted through the eigenvalue curves of the symmetrized Birman-Schwinger
matrix: below the band J(z) is positive semidefinite and z is a root of
det(I + G J) exactly when an eigenvalue of L^T G L (J = L L^T) crosses -1;
above the band the mirrored statement holds with +1.  The integer count of
curves beyond the threshold jumps precisely at the roots, with the jump equal
to the multiplicity; bisecting the jumps is robust against the
even-multiplicity roots that defeat determinant sign scanning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .core import Band, ModelParams, TorusPoint, band_edges
from .determinants import InteractionBasis, secular_entries, secular_matrix
from .errors import BudgetExceeded
from .integrals import (ConstantsSource, EdgeAsymptotics, Side,
                        calibrate_edge_constants, published_asymptote,
                        watson_integrals_at)

MESH_FLOOR = 1e-10
MERGE_TOL = 1e-9
_EPS = float(np.finfo(float).eps)


class Sector(Enum):
    EVEN = "even"
    ODD = "odd"
    MIXED = "mixed"


class FactorKind(Enum):
    MAIN_EVEN = "main_even"
    SUB_EVEN = "sub_even"
    ODD = "odd"
    GENERAL = "general"


@dataclass(frozen=True)
class Eigenvalue:
    """One bound state: position, multiplicity and bookkeeping.

    ``pinned`` marks roots established from the edge asymptotics rather than
    direct bracketing (their z is a model value clamped away from the edge;
    the residual is not meaningful for them).
    """

    z: float
    multiplicity: int
    sector: Sector
    factor: FactorKind
    residual: float
    pinned: bool = False


@dataclass(frozen=True)
class SpectrumReport:
    """Discrete spectrum on both sides of the band at one fiber."""

    K: TorusPoint
    params: ModelParams
    band: Band
    below: tuple[Eigenvalue, ...]
    above: tuple[Eigenvalue, ...]

    @property
    def n_below(self) -> int:
        return sum(ev.multiplicity for ev in self.below)

    @property
    def n_above(self) -> int:
        return sum(ev.multiplicity for ev in self.above)


# ---------------------------------------------------------------------------
# meshes and bracketed scanning


def _delta_mesh(delta_max: float, floor: float = MESH_FLOOR,
                coarse: float = 0.25) -> np.ndarray:
    """Descending distances from the edge: coarse steps far out, halving in."""
    vals = [delta_max]
    d = delta_max
    while d - coarse > 1.0:
        d -= coarse
        vals.append(d)
    d = min(delta_max, 1.0)
    while d > floor * 1.0000001:
        if d < vals[-1] * 0.999999:
            vals.append(d)
        d *= 0.5
    vals.append(floor)
    return np.array(vals)


class _Budget:
    def __init__(self, limit: int, what: str) -> None:
        self.limit = limit
        self.used = 0
        self.what = what

    def spend(self, n: int = 1) -> None:
        self.used += n
        if self.used > self.limit:
            raise BudgetExceeded(
                f"{self.what}: exceeded {self.limit} function evaluations")


def _scan_deltas(fd: Callable[[float], float], delta_max: float, floor: float,
                 budget: _Budget) -> tuple[list[float], float]:
    """Sign-change scan over the descending mesh; Brent-polished roots.

    Returns roots (as distances, any order) and the value at the mesh floor.
    """
    mesh = _delta_mesh(delta_max, floor)
    vals = []
    for d in mesh:
        budget.spend()
        vals.append(fd(float(d)))
    roots = []
    for i in range(len(mesh) - 1):
        hi_d, lo_d = float(mesh[i]), float(mesh[i + 1])
        v1, v2 = vals[i], vals[i + 1]
        if v1 == 0.0:
            roots.append(hi_d)
            continue
        if v1 * v2 < 0.0:
            budget.spend(60)
            r = brentq(fd, lo_d, hi_d, xtol=1e-13, rtol=4 * _EPS, maxiter=200)
            roots.append(float(r))
    if vals[-1] == 0.0:
        roots.append(float(mesh[-1]))
    return roots, vals[-1]


def scan_and_bisect(f: Callable[[float], float], interval: tuple[float, float],
                    edge: float, budget: int = 10000) -> list[float]:
    """Find the roots of f on [lo, hi] with mesh refinement toward ``edge``.

    ``edge`` is the band endpoint adjacent to the interval; the scan mesh
    halves toward it down to a distance of 1e-10 and brackets are polished to
    a width below 1e-12*(1+|z|).  Raises BudgetExceeded past ``budget``
    evaluations of f.
    """
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise ValueError(f"empty interval [{lo}, {hi}]")
    b = _Budget(budget, "root scan")
    if edge >= hi:                       # window sits below the edge
        gap = max(edge - hi, MESH_FLOOR)
        fd = lambda d: f(edge - d)
        roots, _ = _scan_deltas(fd, edge - lo, gap, b)
        zs = [edge - d for d in roots]
    else:                                # window sits above the edge
        gap = max(lo - edge, MESH_FLOOR)
        fd = lambda d: f(edge + d)
        roots, _ = _scan_deltas(fd, hi - edge, gap, b)
        zs = [edge + d for d in roots]
    return sorted(zs)


# ---------------------------------------------------------------------------
# edge models for the zero-fiber factors


def _asymptotics_table(gamma: float, source: ConstantsSource,
                       ) -> dict[tuple[str, Side], EdgeAsymptotics]:
    if source is ConstantsSource.COMPUTED:
        return calibrate_edge_constants(gamma)
    return {(q, s): published_asymptote(q, s, gamma)
            for q in ("a", "b", "c", "e", "f") for s in (Side.BELOW, Side.ABOVE)}


def _model_factor(kind: FactorKind, params: ModelParams, side: Side,
                  table: dict[tuple[str, Side], EdgeAsymptotics],
                  ) -> Callable[[float], float]:
    """Edge model of one determinant factor as a function of distance."""
    lam, mu = params.lam, params.mu
    va = table[("a", side)].value_at
    vb = table[("b", side)].value_at
    vc = table[("c", side)].value_at
    ve = table[("e", side)].value_at
    vf = table[("f", side)].value_at
    if kind is FactorKind.MAIN_EVEN:
        def model(d: float) -> float:
            return ((1.0 + lam * va(d)) * (1.0 + mu * (vc(d) + ve(d)))
                    - 2.0 * lam * mu * vb(d) ** 2)
    elif kind is FactorKind.SUB_EVEN:
        def model(d: float) -> float:
            return 1.0 + mu * (vc(d) - ve(d))
    else:
        def model(d: float) -> float:
            return 1.0 + mu * vf(d)
    return model


def _pending_root(kind: FactorKind, params: ModelParams, side: Side,
                  table: dict[tuple[str, Side], EdgeAsymptotics],
                  floor_value: float) -> float | None:
    """Distance of a not-yet-bracketed root between the mesh floor and the edge.

    Compares the factor's sign at the mesh floor with the model's limiting
    sign; a mismatch means exactly one more crossing (the models are linear
    in ln-distance up to calibration noise).  Returns None when the model
    already disagrees with the measured floor sign (untrustworthy regime,
    e.g. on a region boundary) or when no crossing is pending.
    """
    model = _model_factor(kind, params, side, table)
    m_floor = model(MESH_FLOOR)
    if m_floor == 0.0 or floor_value == 0.0:
        return None
    if math.copysign(1.0, m_floor) != math.copysign(1.0, floor_value):
        return None
    deep = model(1e-300)
    if deep == 0.0 or math.copysign(1.0, deep) == math.copysign(1.0, floor_value):
        return None
    t = brentq(lambda u: model(math.exp(u)), math.log(1e-300),
               math.log(MESH_FLOOR), xtol=1e-12, maxiter=300)
    return math.exp(t)


# ---------------------------------------------------------------------------
# zero-fiber spectrum


def _merge_found(found: list[tuple[float, FactorKind, Sector, int, float, bool]],
                 ) -> list[tuple[float, FactorKind, Sector, int, float, bool]]:
    """Merge roots (keyed by distance) that coincide within MERGE_TOL."""
    found = sorted(found, key=lambda t: t[0])
    merged = []
    for item in found:
        if merged and abs(item[0] - merged[-1][0]) <= MERGE_TOL:
            d, kind, sector, mult, res, pin = merged[-1]
            d2, kind2, sector2, mult2, res2, pin2 = item
            sector = sector if sector is sector2 else Sector.MIXED
            kind = min(kind, kind2, key=lambda k: list(FactorKind).index(k))
            merged[-1] = (d, kind, sector, mult + mult2, min(res, res2), pin and pin2)
        else:
            merged.append(item)
    return merged


def spectrum_k0(params: ModelParams,
                constants_source: ConstantsSource = ConstantsSource.COMPUTED,
                rel_tol: float = 1e-10, budget: int = 10000) -> SpectrumReport:
    """Full discrete spectrum at zero fiber via the factored determinant.

    Roots of the three factors are found per side within the window
    |z - edge| <= |lam| + 2|mu| + 1 (no bound state can bind deeper than the
    interaction norm allows).  Coincident roots are merged with summed
    multiplicity; odd-factor roots carry multiplicity 2.  The constants
    source steers only the near-edge pending-root resolution.
    """
    gamma = params.gamma
    g = params.g
    k0 = TorusPoint(0.0, 0.0)
    band = band_edges(k0, params)
    if params.lam == 0.0 and params.mu == 0.0:
        return SpectrumReport(K=k0, params=params, band=band, below=(), above=())
    table = _asymptotics_table(gamma, constants_source)
    window = abs(params.lam) + 2.0 * abs(params.mu) + 1.0

    factor_defs = [
        (FactorKind.MAIN_EVEN, Sector.EVEN, 1),
        (FactorKind.SUB_EVEN, Sector.EVEN, 1),
        (FactorKind.ODD, Sector.ODD, 2),
    ]

    sides: dict[Side, tuple[Eigenvalue, ...]] = {}
    for side in (Side.BELOW, Side.ABOVE):
        def ints(d: float):
            return watson_integrals_at(side, d, gamma, rel_tol)

        def factor_value(kind: FactorKind, d: float) -> float:
            s = ints(d)
            if kind is FactorKind.MAIN_EVEN:
                return ((1.0 + params.lam * s.a) * (1.0 + params.mu * (s.c + s.e))
                        - 2.0 * params.lam * params.mu * s.b * s.b)
            if kind is FactorKind.SUB_EVEN:
                return 1.0 + params.mu * (s.c - s.e)
            return 1.0 + params.mu * s.f

        found = []
        for kind, sector, mult in factor_defs:
            if kind is not FactorKind.MAIN_EVEN and params.mu == 0.0:
                continue
            b = _Budget(budget, f"{kind.value} factor scan ({side.value})")
            fd = lambda d: factor_value(kind, d)
            roots, floor_val = _scan_deltas(fd, window, MESH_FLOOR, b)
            for d in roots:
                res = abs(fd(d))
                if kind is FactorKind.ODD:
                    res = res * res
                found.append((d, kind, sector, mult, res, False))
            pend = _pending_root(kind, params, side, table, floor_val)
            if pend is not None:
                d_rep = max(pend, 1e-13)
                found.append((d_rep, kind, sector, mult, abs(fd(d_rep)), True))

        evs = []
        for d, kind, sector, mult, res, pin in _merge_found(found):
            z = -d if side is Side.BELOW else 4.0 * g + d
            evs.append(Eigenvalue(z=z, multiplicity=mult, sector=sector,
                                  factor=kind, residual=res, pinned=pin))
        evs.sort(key=lambda ev: ev.z)
        sides[side] = tuple(evs)

    return SpectrumReport(K=k0, params=params, band=band,
                          below=sides[Side.BELOW], above=sides[Side.ABOVE])


# ---------------------------------------------------------------------------
# general fiber: eigenvalue-curve counting


def _threshold_count(j: np.ndarray, gvec: np.ndarray, side: Side) -> tuple[int, np.ndarray]:
    """Number of Birman-Schwinger curves beyond the root threshold.

    Returns the count and the curve values (eigenvalues of L^T G L with
    J = L L^T below the band, -J = L L^T above).
    """
    w, v = np.linalg.eigh(j)
    if side is Side.BELOW:
        w = np.maximum(w, 0.0)
    else:
        w = np.maximum(-w, 0.0)
    sq = np.sqrt(w)
    core = v.T @ (gvec[:, None] * v)
    a = sq[:, None] * core * sq[None, :]
    eta = np.linalg.eigvalsh(a)
    if side is Side.BELOW:
        return int(np.sum(eta < -1.0)), eta
    return int(np.sum(eta > 1.0)), eta


def count_jump_scan(nfun: Callable[[float], int], delta_max: float, floor: float,
                    width_tol: float, budget: _Budget) -> list[tuple[float, int]]:
    """Locate jumps of an integer-valued function of the edge distance.

    Returns (distance, |jump|) pairs; segments whose endpoints agree are
    dropped, so an equal number of up and down crossings inside one segment
    is invisible (the mesh is chosen fine enough that this does not occur
    away from parameter-space boundaries).
    """
    mesh = _delta_mesh(delta_max, floor)
    ns = []
    for d in mesh:
        budget.spend()
        ns.append(nfun(float(d)))
    roots = []
    stack = [(float(mesh[i]), ns[i], float(mesh[i + 1]), ns[i + 1])
             for i in range(len(mesh) - 1)]
    while stack:
        d_hi, n_hi, d_lo, n_lo = stack.pop()
        if n_hi == n_lo:
            continue
        if d_hi - d_lo <= width_tol:
            roots.append((0.5 * (d_hi + d_lo), abs(n_hi - n_lo)))
            continue
        mid = math.sqrt(d_hi * d_lo) if d_hi / max(d_lo, 1e-300) > 4.0 \
            else 0.5 * (d_hi + d_lo)
        budget.spend()
        n_mid = nfun(mid)
        stack.append((d_hi, n_hi, mid, n_mid))
        stack.append((mid, n_mid, d_lo, n_lo))
    return roots


def _degenerate_spectrum(K: TorusPoint, params: ModelParams, band: Band) -> SpectrumReport:
    e = band.e_min
    cands = []
    if params.lam != 0.0:
        cands.append((e + params.lam, 1))
    if params.mu != 0.0:
        zmu = e + 0.5 * params.mu
        merged = False
        if cands and abs(cands[0][0] - zmu) <= MERGE_TOL:
            cands[0] = (cands[0][0], cands[0][1] + 4)
            merged = True
        if not merged:
            cands.append((zmu, 4))
    below, above = [], []
    for z, m in cands:
        ev = Eigenvalue(z=z, multiplicity=m, sector=Sector.MIXED,
                        factor=FactorKind.GENERAL, residual=0.0)
        (below if z < e else above).append(ev)
    below.sort(key=lambda ev: ev.z)
    above.sort(key=lambda ev: ev.z)
    return SpectrumReport(K=K, params=params, band=band,
                          below=tuple(below), above=tuple(above))


def matrix_nullity(z: float, K: TorusPoint, params: ModelParams,
                   rel_tol: float = 1e-10) -> int:
    """Rank deficiency of I + G J(z), via singular values below 1e-8."""
    m = secular_matrix(z, K, params, rel_tol)
    sv = np.linalg.svd(m.entries, compute_uv=False)
    return int(np.sum(sv < 1e-8 * max(1.0, float(sv[0]))))


def spectrum_general(K: TorusPoint, params: ModelParams, rel_tol: float = 1e-10,
                     budget: int = 10000) -> SpectrumReport:
    """Discrete spectrum at an arbitrary fiber.

    Counts threshold crossings of the Birman-Schwinger eigenvalue curves on
    an edge-refined mesh and bisects the crossing positions; the jump size is
    the multiplicity.  Near the mesh floor, two extra diagnostics decide
    pending roots: the divergent channel (weight proportional to lam + 2*mu,
    independent of the fiber) and a two-depth extrapolation of the finite
    curves.
    """
    band = band_edges(K, params)
    if band.degenerate:
        return _degenerate_spectrum(K, params, band)
    if params.lam == 0.0 and params.mu == 0.0:
        return SpectrumReport(K=K, params=params, band=band, below=(), above=())
    gvec = InteractionBasis.weights(params)
    window = abs(params.lam) + 2.0 * abs(params.mu) + 1.0
    div_weight = params.lam + 2.0 * params.mu

    sides: dict[Side, tuple[Eigenvalue, ...]] = {}
    for side in (Side.BELOW, Side.ABOVE):
        edge = band.e_min if side is Side.BELOW else band.e_max
        sign = -1.0 if side is Side.BELOW else 1.0

        def jmat(d: float) -> np.ndarray:
            j, _ = secular_entries(0.0, K, params, rel_tol, side=side, delta=d)
            return j

        def nfun(d: float) -> int:
            return _threshold_count(jmat(d), gvec, side)[0]

        b = _Budget(budget, f"curve count scan ({side.value})")
        width_tol = 1e-12 * (1.0 + abs(edge))
        jumps = count_jump_scan(nfun, window, MESH_FLOOR, width_tol, b)

        # pending-root diagnostics at and below the mesh floor
        _, eta_floor = _threshold_count(jmat(MESH_FLOOR), gvec, side)
        _, eta_deep = _threshold_count(jmat(1e-12), gvec, side)
        pend = 0
        thr = -1.0 if side is Side.BELOW else 1.0
        crossed = (lambda x: x < thr) if side is Side.BELOW else (lambda x: x > thr)
        div_idx = None
        if side is Side.BELOW and div_weight < -1e-12:
            div_idx = 0
            if not crossed(eta_deep[0]):
                pend += 1
        if side is Side.ABOVE and div_weight > 1e-12:
            div_idx = len(eta_deep) - 1
            if not crossed(eta_deep[div_idx]):
                pend += 1
        l_f, l_d = -math.log(MESH_FLOOR), -math.log(1e-12)
        for k in range(len(eta_deep)):
            if k == div_idx or crossed(eta_deep[k]):
                continue
            cc = (eta_floor[k] - eta_deep[k]) / (1.0 / l_f - 1.0 / l_d)
            eta_inf = eta_deep[k] - cc / l_d
            if abs(cc) < 10.0 and crossed(eta_inf) and abs(eta_inf - thr) > 1e-6:
                pend += 1

        evs = []
        for d, mult in jumps:
            z = edge + sign * d
            res = abs(float(np.linalg.det(np.eye(5) + gvec[:, None] * jmat(d))))
            evs.append(Eigenvalue(z=z, multiplicity=mult, sector=Sector.MIXED,
                                  factor=FactorKind.GENERAL, residual=res))
        for _ in range(pend):
            d_rep = 1e-13
            evs.append(Eigenvalue(z=edge + sign * d_rep, multiplicity=1,
                                  sector=Sector.MIXED, factor=FactorKind.GENERAL,
                                  residual=float("inf"), pinned=True))
        # merge coincident entries
        packed = [(abs(ev.z - edge), ev.factor, ev.sector, ev.multiplicity,
                   ev.residual, ev.pinned) for ev in evs]
        evs = [Eigenvalue(z=edge + sign * d, multiplicity=m, sector=sec,
                          factor=kind, residual=res, pinned=pin)
               for d, kind, sec, m, res, pin in _merge_found(packed)]
        evs.sort(key=lambda ev: ev.z)
        sides[side] = tuple(evs)

    return SpectrumReport(K=K, params=params, band=band,
                          below=sides[Side.BELOW], above=sides[Side.ABOVE])
