"""Grid-discretization oracles: jump counting, dense diagonalization, minimax.

These are the independent checks the analytic solver is measured against, so
they get their own correctness tests: exact mode orthonormality on the grid,
agreement with the dense matrix, and agreement with the frozen benchmarks.
"""

from __future__ import annotations

import numpy as np
import pytest

from latticebound.core import ORIGIN, ModelParams, TorusPoint
from latticebound.oracle import (GridModel, dense_validate, minimax_values,
                                 oracle_counts)
from latticebound.spectrum import spectrum_general, spectrum_k0


def expand(evs):
    out = []
    for ev in evs:
        out.extend([ev.z] * ev.multiplicity)
    return out


def test_grid_modes_are_orthonormal():
    # uniform trapezoid quadrature is exact for low trigonometric degree
    model = GridModel.build(TorusPoint(0.9, -2.2), ModelParams(1.7, 1.0, 1.0), 32)
    gram = model.modes @ model.modes.T
    assert np.allclose(gram, np.eye(5), atol=1e-12)


def test_grid_band_is_exact_at_zero_fiber():
    model = GridModel.build(ORIGIN, ModelParams(1.0, 0.0, 0.0), 64)
    assert model.band.e_min == pytest.approx(0.0, abs=1e-14)
    assert model.band.e_max == pytest.approx(8.0, abs=1e-14)


@pytest.mark.parametrize("lam,mu,nb,na", [
    (1.0, 10.0, 0, 4),
    (0.0, -12.0, 4, 0),
    (-6.0, -10.0, 5, 0),
    (-3.0, 2.0, 1, 1),
    (8.5, 4.0, 0, 2),
])
def test_jump_counts_match_solver(lam, mu, nb, na):
    params = ModelParams(1.0, lam, mu)
    rep = oracle_counts(ORIGIN, params, n=256)
    assert (rep.n_below, rep.n_above) == (nb, na)
    assert (rep.n_below, rep.n_above) == (
        spectrum_k0(params).n_below, spectrum_k0(params).n_above)


@pytest.mark.parametrize("lam,mu", [(1.0, 10.0), (0.0, -12.0)])
def test_dense_agrees_with_jump_counting(lam, mu):
    params = ModelParams(1.0, lam, mu)
    dense = dense_validate(ORIGIN, params, n=40)
    jumps = oracle_counts(ORIGIN, params, n=40)
    assert (dense.n_below, dense.n_above) == (jumps.n_below, jumps.n_above)
    assert expand(dense.below) == pytest.approx(expand(jumps.below), abs=1e-7)
    assert expand(dense.above) == pytest.approx(expand(jumps.above), abs=1e-7)


def test_dense_resolves_double_eigenvalue_as_cluster():
    rep = dense_validate(ORIGIN, ModelParams(1.0, 1.0, 10.0), n=40)
    mults = sorted(ev.multiplicity for ev in rep.above)
    assert mults == [1, 1, 2]


def test_dense_free_operator_is_purely_diagonal():
    params = ModelParams(0.8, 0.0, 0.0)
    model = GridModel.build(TorusPoint(0.4, 1.3), params, 20)
    ev = np.linalg.eigvalsh(model.dense_matrix())
    assert ev == pytest.approx(np.sort(model.diag), abs=1e-12)
    rep = dense_validate(TorusPoint(0.4, 1.3), params, n=20)
    assert rep.below == () and rep.above == ()


def test_general_fiber_against_analytic_counter():
    params = ModelParams(1.0, 6.0, 10.0)
    K = TorusPoint(1.0, 0.5)
    grid = oracle_counts(K, params, n=128)
    analytic = spectrum_general(K, params)
    assert (grid.n_below, grid.n_above) == (analytic.n_below, analytic.n_above)


def test_minimax_values_clamp_to_band_edges():
    params = ModelParams(1.0, 1.0, 10.0)
    lo, hi = minimax_values(ORIGIN, params, n=128)
    assert lo == pytest.approx(np.zeros(5), abs=1e-12)      # nothing below
    assert hi[:4] == pytest.approx([10.564420, 9.617496, 9.617496, 9.219394],
                                   abs=1e-5)
    assert hi[4] == pytest.approx(8.0, abs=1e-12)           # clamped


def test_binding_energies_grow_along_the_fiber_axis():
    # moving K1 from 0 to pi narrows the band faster than the levels move:
    # every above-band binding energy E_n - E_max is non-decreasing
    params = ModelParams(1.0, 1.0, 10.0)
    n = 64
    bindings = []
    for k in range(9):
        K = TorusPoint(k * np.pi / 8.0, 0.0)
        _, hi = minimax_values(K, params, n=n)
        e_max = GridModel.build(K, params, n).band.e_max
        bindings.append(hi - e_max)
    steps = np.diff(np.array(bindings), axis=0)
    assert (steps >= -1e-9).all()


def test_grid_refinement_reaches_frozen_positions():
    params = ModelParams(1.0, 0.0, -12.0)
    deepest = -3.292439
    for n in (128, 256):
        rep = oracle_counts(ORIGIN, params, n=n)
        assert rep.below[0].z == pytest.approx(deepest, abs=5e-7)


def test_grid_size_limits():
    params = ModelParams(1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        GridModel.build(ORIGIN, params, 8)
    with pytest.raises(ValueError):
        oracle_counts(ORIGIN, params, n=12)
    with pytest.raises(ValueError):
        dense_validate(ORIGIN, params, n=60)
