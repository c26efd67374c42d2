"""Phase atlas: coupling-plane regions, predicted counts, and sweeps.

The (lam, mu) plane splits into regions on which the number of bound states
on each side of the band is constant.  Three families of curves do the
cutting, all scaling linearly in g = 1 + gamma:

* the sign of S+ = 2*mu + lam - lam*mu/g (above) and of
  S- = 2*mu + lam + lam*mu/g (below), together with mu vs +-g, fixes how
  many roots the coupled even-channel determinant contributes (0, 1 or 2);
* |mu| against the decoupled-even threshold t_s adds one root;
* |mu| against the odd-channel threshold t_d adds a double root.

The thresholds are reciprocals of band-edge limits of integral
combinations, so they exist in two flavors: the published closed forms and
the values this package calibrates numerically (`ConstantsSource`).  The
two disagree about t_s by a factor of two; `threshold_scan` measures which
one the operator actually obeys.

Sign-condition conventions: the default ("mirrored") uses sign conditions
on S+ that mirror the S- family, which is what direct diagonalization
confirms; the alternative ("printed") keeps the swapped plus-side sign
conditions found in circulating statements of the count table and is
retained for side-by-side comparison only.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ModelParams, TorusPoint, ORIGIN
from .integrals import (ConstantsSource, Side, ensure_calibrated,
                        predicted_asymptote, published_asymptote,
                        watson_integrals_at)
from .spectrum import SpectrumReport, spectrum_general, spectrum_k0

CONVENTIONS = ("mirrored", "printed")


# ---------------------------------------------------------------------------
# thresholds


@dataclass(frozen=True)
class Thresholds:
    """Positive mu-thresholds for the decoupled-even and odd channels."""

    t_s: float
    t_d: float
    gamma: float
    source: ConstantsSource


def binding_thresholds(gamma: float,
                       source: ConstantsSource = ConstantsSource.COMPUTED,
                       ) -> Thresholds:
    """mu levels at which the decoupled channels start binding.

    t_s = 1 / lim (c - e) and t_d = 1 / lim f, both limits taken at the
    lower edge where they are positive; the upper edge gives the same
    numbers with opposite sign, hence the symmetric regions at -t_s, -t_d.
    """
    fn = (published_asymptote if source is ConstantsSource.PUBLISHED
          else predicted_asymptote)
    off_c = fn("c", Side.BELOW, gamma).offset
    off_e = fn("e", Side.BELOW, gamma).offset
    off_f = fn("f", Side.BELOW, gamma).offset
    return Thresholds(t_s=1.0 / (off_c - off_e), t_d=1.0 / off_f,
                      gamma=gamma, source=source)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class RegionLabel:
    """Which cell of each region family a coupling pair falls in.

    Labels ending in "b" sit within ``tol`` of a defining equality; the
    label then names the cell whose count survives in the closure (smaller
    count wins: a root absorbed exactly at threshold is not a bound state).
    """

    s_region: str
    d_region: str
    c_plus: str
    c_minus: str
    gamma: float
    source: ConstantsSource
    convention: str
    s_plus: float
    s_minus: float
    thresholds: Thresholds


def _axis_region(mu: float, t: float, stem: str, tol: float) -> str:
    if abs(mu - t) <= tol or abs(mu + t) <= tol:
        return f"{stem}b"
    if mu > t:
        return f"{stem}+"
    if mu < -t:
        return f"{stem}-"
    return stem


def _c_family(s_val: float, mu: float, g: float, plus: bool, tol: float) -> str:
    """Coupled-even cell from the sign of S+- and of mu -+ g.

    Plus family (above the band): C0 = {S+ < 0, mu < g}, C1 = {S+ > 0},
    C2 = {S+ < 0, mu > g}; the minus family is the mu -> -mu, S- > 0 mirror.
    Boundary resolution follows closure precedence C0 -> C1 -> C2.
    """
    sgn = "+" if plus else "-"
    inner = s_val < 0.0 if plus else s_val > 0.0   # the C0/C2 side of S=0
    outer_mu = mu > g + tol if plus else mu < -g - tol
    if abs(s_val) <= tol:
        return f"C1{sgn}b" if outer_mu else f"C0{sgn}b"
    if not inner:
        return f"C1{sgn}"
    if outer_mu:
        return f"C2{sgn}"
    near_g = abs(mu - g) <= tol if plus else abs(mu + g) <= tol
    return f"C0{sgn}b" if near_g else f"C0{sgn}"


def classify(params: ModelParams,
             source: ConstantsSource = ConstantsSource.COMPUTED,
             convention: str = "mirrored", tol: float = 1e-12) -> RegionLabel:
    """Place (lam, mu) in the three region families.

    With the computed source this requires edge constants already
    calibrated for this gamma (CalibrationMissing otherwise) — the caller
    decides when to spend that time, see `ensure_calibrated`.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    thr = binding_thresholds(params.gamma, source)
    g = params.g
    s_plus = 2.0 * params.mu + params.lam - params.lam * params.mu / g
    s_minus = 2.0 * params.mu + params.lam + params.lam * params.mu / g
    # the printed plus-side table carries the opposite S+ sign conditions
    eff_plus = s_plus if convention == "mirrored" else -s_plus
    return RegionLabel(
        s_region=_axis_region(params.mu, thr.t_s, "S0", tol),
        d_region=_axis_region(params.mu, thr.t_d, "D0", tol),
        c_plus=_c_family(eff_plus, params.mu, g, True, tol),
        c_minus=_c_family(s_minus, params.mu, g, False, tol),
        gamma=params.gamma, source=source, convention=convention,
        s_plus=s_plus, s_minus=s_minus, thresholds=thr,
    )


# ---------------------------------------------------------------------------
# predicted counts


_C_CONTRIB = {"C0": 0, "C1": 1, "C2": 2}


@dataclass(frozen=True)
class PredictedCounts:
    """Bound-state counts implied by a region label.

    At zero quasimomentum the counts are exact; at nonzero quasimomentum
    they are lower bounds, except that a side predicting 5 stays exactly 5
    (the interaction has rank five, so no side can exceed it).
    """

    n_below_k0: int
    n_above_k0: int
    parts_below: tuple[int, int, int]   # (coupled-even, decoupled-even, odd)
    parts_above: tuple[int, int, int]
    lower_bound_below_k: int
    lower_bound_above_k: int
    exact_below_all_k: bool
    exact_above_all_k: bool


def predicted_counts(label: RegionLabel) -> PredictedCounts:
    c_above = _C_CONTRIB[label.c_plus[:2]]
    c_below = _C_CONTRIB[label.c_minus[:2]]
    s_above = 1 if label.s_region == "S0+" else 0
    s_below = 1 if label.s_region == "S0-" else 0
    d_above = 2 if label.d_region == "D0+" else 0
    d_below = 2 if label.d_region == "D0-" else 0
    n_above = c_above + s_above + d_above
    n_below = c_below + s_below + d_below
    return PredictedCounts(
        n_below_k0=n_below, n_above_k0=n_above,
        parts_below=(c_below, s_below, d_below),
        parts_above=(c_above, s_above, d_above),
        lower_bound_below_k=n_below, lower_bound_above_k=n_above,
        exact_below_all_k=(n_below == 5), exact_above_all_k=(n_above == 5),
    )


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepRow:
    """One (lam, mu, K) evaluation of prediction vs computation."""

    lam: float
    mu: float
    gamma: float
    K: TorusPoint
    label: RegionLabel | None
    pred: PredictedCounts | None
    comp_below: int | None
    comp_above: int | None
    eigs_below: tuple[float, ...]
    eigs_above: tuple[float, ...]
    agree: bool
    error: str


def _expand(report_side) -> tuple[float, ...]:
    return tuple(ev.z for ev in report_side for _ in range(ev.multiplicity))


def _reading_note(label: RegionLabel, pred: PredictedCounts) -> str:
    """Flag minus-side count-table rows where the two circulating readings
    of the decoupled-even condition (mu < -t_s vs mu > +t_s) disagree."""
    if label.c_minus[:2] not in ("C1", "C2"):
        return ""
    sym = label.s_region == "S0-"
    swapped = label.s_region == "S0+"
    if sym == swapped:
        return ""
    alt = pred.n_below_k0 - (1 if sym else 0) + (1 if swapped else 0)
    return (f"minus-table readings differ: symmetric predicts below="
            f"{pred.n_below_k0}, swapped would predict {alt}")


def _sweep_point(task: tuple) -> SweepRow:
    (lam, mu, gamma, k1, k2, source_val, convention, rel_tol) = task
    source = ConstantsSource(source_val)
    K = TorusPoint(k1, k2)
    params = ModelParams(gamma=gamma, lam=lam, mu=mu)
    try:
        if source is ConstantsSource.COMPUTED:
            ensure_calibrated(gamma)
        label = classify(params, source, convention)
        pred = predicted_counts(label)
        at_zero = k1 == 0.0 and k2 == 0.0
        rep: SpectrumReport = (spectrum_k0(params, constants_source=source,
                                           rel_tol=rel_tol)
                               if at_zero
                               else spectrum_general(K, params, rel_tol=rel_tol))
        nb, na = rep.n_below, rep.n_above
        if at_zero:
            agree = nb == pred.n_below_k0 and na == pred.n_above_k0
        else:
            agree = (nb >= pred.lower_bound_below_k
                     and na >= pred.lower_bound_above_k
                     and (not pred.exact_below_all_k or nb == 5)
                     and (not pred.exact_above_all_k or na == 5))
        return SweepRow(lam=lam, mu=mu, gamma=gamma, K=K, label=label,
                        pred=pred, comp_below=nb, comp_above=na,
                        eigs_below=_expand(rep.below),
                        eigs_above=_expand(rep.above),
                        agree=agree, error=_reading_note(label, pred))
    except Exception as exc:  # noqa: BLE001 - a sweep never aborts
        return SweepRow(lam=lam, mu=mu, gamma=gamma, K=K, label=None,
                        pred=None, comp_below=None, comp_above=None,
                        eigs_below=(), eigs_above=(), agree=False,
                        error=f"{type(exc).__name__}: {exc}")


def _axis_values(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0.0:
        raise ValueError("sweep step must be positive")
    if hi < lo:
        raise ValueError("empty sweep range")
    n = int(math.floor((hi - lo) / step + 1e-9))
    return [round(lo + i * step, 12) for i in range(n + 1)]


def sweep(lam_range: tuple[float, float], mu_range: tuple[float, float],
          step: float, gamma: float = 1.0,
          K_list: Sequence[TorusPoint] = (ORIGIN,),
          source: ConstantsSource = ConstantsSource.COMPUTED,
          convention: str = "mirrored", rel_tol: float = 1e-10,
          workers: int = 1) -> list[SweepRow]:
    """Evaluate prediction vs computation over a coupling grid.

    Rows come back in row-major order (lam outer, mu inner, then K_list
    order) regardless of worker count, so equal configurations produce
    identical tables. Per-point failures land in the row's error field.
    """
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    if source is ConstantsSource.COMPUTED:
        ensure_calibrated(gamma)   # also warms forked workers via the cache
    tasks = [(lam, mu, gamma, K.p1, K.p2, source.value, convention, rel_tol)
             for lam in _axis_values(*lam_range, step)
             for mu in _axis_values(*mu_range, step)
             for K in K_list]
    if workers <= 1:
        return [_sweep_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, len(tasks) // (workers * 8))
        return list(pool.map(_sweep_point, tasks, chunksize=chunk))


# ---------------------------------------------------------------------------
# threshold adjudication


@dataclass(frozen=True)
class ThresholdScanResult:
    """Outcome of the mu-axis scan for the decoupled-even threshold."""

    gamma: float
    appearance_mu: float            # first grid mu with a bound state
    candidate_published: float
    candidate_computed: float
    nearest: ConstantsSource
    mu_step: float


def threshold_scan(gamma: float = 1.0, mu_lo: float = 3.0, mu_hi: float = 8.0,
                   step: float = 1e-3) -> ThresholdScanResult:
    """Scan lam=0 along mu for the birth of the decoupled-even bound state.

    The decoupled even channel binds above the band once 1 + mu*(c-e) goes
    negative near the edge, so the channel's threshold is visible as the mu
    where a sign change first appears.  Both closed-form candidates for the
    threshold differ by a factor two; the scan reports which one the
    integrals actually produce.
    """
    deltas = np.geomspace(1e-10, 2.0 * (1.0 + gamma), 160)
    sets = [watson_integrals_at(Side.ABOVE, d, gamma) for d in deltas]
    ce = np.array([s.c - s.e for s in sets])
    mus = np.array(_axis_values(mu_lo, mu_hi, step))
    has_root = ((1.0 + np.outer(mus, ce)) < 0.0).any(axis=1)
    if not has_root.any():
        raise ValueError("no binding threshold inside the scanned mu range")
    appearance = float(mus[int(np.argmax(has_root))])
    g = 1.0 + gamma
    cand_pub = binding_thresholds(gamma, ConstantsSource.PUBLISHED).t_s
    cand_comp = math.pi * g / (4.0 - math.pi)
    nearest = (ConstantsSource.PUBLISHED
               if abs(appearance - cand_pub) < abs(appearance - cand_comp)
               else ConstantsSource.COMPUTED)
    return ThresholdScanResult(gamma=gamma, appearance_mu=appearance,
                               candidate_published=cand_pub,
                               candidate_computed=cand_comp,
                               nearest=nearest, mu_step=step)
