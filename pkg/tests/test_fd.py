import math

import numpy as np
import pytest

from grazing import fd, probes
from grazing import solutions as sol
from grazing.acceptance import dmp_trials
from grazing.errors import ValidationError

PHI0 = lambda x, v: sol.phi(0, x, v)


def test_grid_validation():
    with pytest.raises(ValidationError):
        fd.GridSpec(1.0, 1.0, 3, 8)
    with pytest.raises(ValidationError):
        fd.GridSpec(1.0, 1.0, 8, 9)
    with pytest.raises(ValidationError):
        fd.GridSpec(0.0, 1.0, 8, 8)
    g = fd.GridSpec(2.0, 1.0, 8, 8)
    assert g.hx == 0.25 and g.hv == 0.25 and 0.0 in g.v
    assert g.refine().shape == (17, 17)


def test_zero_data_gives_zero():
    f = fd.solve(fd.assemble(fd.GridSpec(1, 1, 16, 16)))
    assert np.all(f.values == 0.0)


def test_constants_are_exact():
    grid = fd.GridSpec(1.5, 2.0, 24, 20)
    a = lambda x, v: 1.0 + x + v**2
    f = fd.solve(fd.assemble(grid, a, 0.0, fd.Inflow(lambda x, v: np.ones_like(x))))
    np.testing.assert_allclose(f.values, 1.0, rtol=0, atol=1e-13)
    assert fd.residual(fd.sample_field(lambda x, v: np.ones_like(x), grid), a) == 0.0


def test_solve_residual_small():
    grid = fd.GridSpec(1.0, 1.0, 40, 40)
    a = lambda x, v: 1.0 + 0.5 * np.sin(3 * x) * np.cos(v)
    F = lambda x, v: np.exp(-x) * v
    f = fd.solve(fd.assemble(grid, a, F, fd.Inflow(PHI0)))
    assert fd.residual(f, a, F) <= 1e-9
    assert f.meta["residual"] <= 1e-9


def test_nonpositive_coefficient_rejected():
    with pytest.raises(ValidationError):
        fd.assemble(fd.GridSpec(1, 1, 8, 8), a=0.0)


def test_sampled_phi0_residual_is_first_order():
    res = []
    for n in (64, 128, 256, 512):
        grid = fd.GridSpec(1.0, 1.0, n, n)
        X, _ = grid.mesh()
        res.append(fd.residual(fd.sample_field(PHI0, grid), mask=X >= 0.25))
    slopes = [math.log2(a / b) for a, b in zip(res, res[1:])]
    assert all(abs(s - 1.0) <= 0.2 for s in slopes)
    np.testing.assert_allclose(res, [0.00671, 0.00328, 0.00163, 0.000808], rtol=0.01)


def test_phi0_convergence_away_from_wall():
    rows = fd.convergence_study(PHI0, levels=3, error_mask=lambda x, v: x >= 0.25)
    orders = [r.observed_order for r in rows[1:]]
    assert all(0.8 <= o <= 1.2 for o in orders)
    assert rows[0].observed_order is None


def test_psi0_forced_convergence():
    # exact solution of v∂x f - ∂vv f = 1; slower near the wall layer
    rows = fd.convergence_study(lambda x, v: sol.psi0_forced(x, v), levels=3, F=1.0)
    assert all(r.observed_order > 0.5 for r in rows[1:])
    assert rows[-1].max_error < rows[0].max_error / 2


def test_convergence_study_needs_three_levels():
    with pytest.raises(ValidationError):
        fd.convergence_study(PHI0, levels=2)


def test_discrete_maximum_principle():
    assert dmp_trials(10, seed=17) <= 0.0


def test_comparison_ordering():
    grid = fd.GridSpec(1.0, 1.0, 32, 32)
    g1 = lambda x, v: np.sin(3 * x + v)
    g2 = lambda x, v: np.sin(3 * x + v) + 0.1 + x * x
    f1 = fd.solve(fd.assemble(grid, 1.0, 0.0, fd.Inflow(g1)))
    f2 = fd.solve(fd.assemble(grid, 1.0, 0.0, fd.Inflow(g2)))
    assert np.all(f2.values >= f1.values)


def test_matrix_is_m_matrix():
    system = fd.assemble(fd.GridSpec(1.0, 1.0, 12, 12), 1.0, 0.0, fd.Inflow(PHI0))
    A = system.matrix.toarray()
    off = A - np.diag(np.diag(A))
    assert np.all(np.diag(A) > 0) and np.all(off <= 0)
    assert np.all(np.linalg.inv(A) >= -1e-12)


def test_diffuse_conservation():
    grid = fd.GridSpec(1.0, 5.0, 32, 64)
    far = lambda x, v: np.exp(-v * v) * (1 + x)
    f = fd.solve(fd.assemble(grid, 1.0, 0.0, fd.Diffuse(fd.maxwellian, far)))
    v = grid.v
    jout = np.arange(0, grid.nv // 2 + 1)
    w = np.full(jout.size, grid.hv)
    w[0] = w[-1] = grid.hv / 2
    flux = float(np.sum(w * np.abs(v[jout]) * f.values[0, jout]))
    jin = np.arange(grid.nv // 2 + 1, grid.nv)
    np.testing.assert_allclose(f.values[0, jin], fd.maxwellian(v[jin]) * flux, rtol=1e-10, atol=1e-14)
    assert f.meta["wall_truncation"] < 1e-8


def test_non_normalized_wall_density_rejected():
    with pytest.raises(ValidationError):
        fd.assemble(fd.GridSpec(1, 3, 8, 8), bc=fd.Diffuse(lambda v: np.exp(-v * v)))
    assert fd.wall_normalization(fd.maxwellian) == pytest.approx(1.0, abs=1e-12)


def test_field_csv_roundtrip_and_interpolation():
    grid = fd.GridSpec(1.0, 1.0, 8, 8)
    f = fd.sample_field(lambda x, v: x + 2 * v, grid)
    g = fd.Field.from_csv(f.to_csv(["note"]))
    assert g.grid == grid and np.array_equal(g.values, f.values)
    # bilinear interpolation is exact on bilinear functions
    assert f(0.3, -0.45) == pytest.approx(0.3 - 0.9)
    with pytest.raises(ValidationError):
        f(1.5, 0.0)
    with pytest.raises(ValidationError):
        fd.Field(np.full(grid.shape, np.nan), grid)


def test_deterministic_solve():
    grid = fd.GridSpec(1.0, 1.0, 48, 48)
    a = fd.solve(fd.assemble(grid, 1.0, 0.0, fd.Inflow(PHI0)))
    b = fd.solve(fd.assemble(grid, 1.0, 0.0, fd.Inflow(PHI0)))
    assert np.array_equal(a.values, b.values)


def test_harnack_ratio_stable_under_refinement():
    data = lambda x, v: 1.0 + np.maximum(v, 0.0)
    ratios = []
    for n in (64, 128):
        f = fd.solve(fd.assemble(fd.GridSpec(2.0, 2.0, n, n), 1.0, 0.0, fd.Inflow(data)))
        rep = probes.harnack_ratio(f, 1.0, 0.0, 0.5)
        assert rep.contained
        ratios.append(rep.ratio)
    assert math.isfinite(ratios[0]) and ratios[0] >= 1.0
    assert abs(ratios[1] / ratios[0] - 1.0) <= 0.2
    np.testing.assert_allclose(ratios, [1.02646, 1.02641], rtol=1e-4)
