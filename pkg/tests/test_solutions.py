import math

import mpmath as mp
import numpy as np
import pytest

from grazing import solutions as sol
from grazing.errors import DomainError, FamilyIndexError, RegionError

RNG = np.random.default_rng(314)


def mp_phi(m, x, v, dps=60):
    """Independent φ_m from mpmath's hyperu (same closed form, 60 digits)."""
    with mp.workdps(dps):
        lam = mp.mpf(1) / 6 + m
        Mm = mp.gamma(mp.mpf(7) / 6 + m) / mp.gamma(mp.mpf(1) / 6 - m)
        c = mp.sign(Mm)
        x, v = mp.mpf(x), mp.mpf(v)
        s = v**3 / (9 * x)
        if v < 0:
            return float(c * x**lam * mp.hyperu(-lam, mp.mpf(2) / 3, -s))
        return float(c * Mm * x**lam * mp.exp(-s) * mp.hyperu(mp.mpf(5) / 6 + m, mp.mpf(2) / 3, s))


def mp_psi0(x, v, dps=60):
    with mp.workdps(dps):
        k = 2
        C = mp.gamma(mp.mpf(2) / 3) * mp.gamma(mp.mpf(1 - k) / 3) / (mp.gamma(-mp.mpf(k) / 3) * mp.gamma(mp.mpf(4) / 3))
        x, v = mp.mpf(x), mp.mpf(v)
        s = v**3 / (9 * x)
        w = v / (9 * x) ** (mp.mpf(1) / 3)
        return float(x ** (mp.mpf(k) / 3) * (mp.hyp1f1(-mp.mpf(k) / 3, mp.mpf(2) / 3, -s) + C * w * mp.hyp1f1(mp.mpf(1 - k) / 3, mp.mpf(4) / 3, -s)))


def interior_points(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(0.01, 1.0, n), rng.uniform(-1.0, 1.0, n)


# ----------------------------------------------------------------- indices


def test_index_constants():
    i0, i1 = sol.PhiIndex(0), sol.PhiIndex(1)
    assert i0.lam == pytest.approx(1 / 6) and i0.a == pytest.approx(5 / 6)
    assert i0.M == pytest.approx(1 / 6, rel=1e-14)
    assert i1.M == pytest.approx(-35 / 216, rel=1e-12)
    assert i1.M == pytest.approx((1 / 36 - 1) * i0.M, rel=1e-12)
    assert i0.degree == pytest.approx(0.5) and i1.degree == pytest.approx(3.5)
    assert sol.PsiIndex(1).kappa == 5
    with pytest.raises(FamilyIndexError):
        sol.PhiIndex(-2)
    with pytest.raises(FamilyIndexError):
        sol.PsiIndex(-1)


def test_c_lambda_closed_form_matches_limit():
    cl = sol.PsiIndex(0).c_lambda
    x = np.geomspace(1e-14, 1e-11, 4)
    np.testing.assert_allclose(sol.psi(0, x, 1.0), cl, rtol=1e-8)
    vs = np.array([0.5, 1.0, 2.0])
    np.testing.assert_allclose(np.asarray(sol.psi(0, 0.0, vs)) / vs**2, cl, rtol=1e-12)
    assert cl == pytest.approx(mp_psi0(1e-16, 1.0), rel=1e-10)


# ---------------------------------------------------------------- φ family


def test_phi_oracle_values():
    assert sol.phi(0, 1.0, 0.0) == pytest.approx(math.gamma(1 / 3) / math.gamma(1 / 6), rel=1e-12)
    for x in (0.01, 2.0):
        assert sol.phi(0, x, 0.0) == pytest.approx(x ** (1 / 6) * math.gamma(1 / 3) / math.gamma(1 / 6), rel=1e-12)
    assert sol.phi(0, 0.0, 1.0) == 0.0


@pytest.mark.parametrize("m", [-1, 0, 1, 2])
def test_phi_against_mpmath(m):
    x, v = interior_points(25, seed=m + 5)
    got = np.asarray(sol.phi(m, x, v))
    ref = np.array([mp_phi(m, xi, vi) for xi, vi in zip(x, v)])
    np.testing.assert_allclose(got, ref, rtol=1e-9, atol=1e-300)


@pytest.mark.parametrize("m", [-1, 0, 1, 2])
@pytest.mark.parametrize("r", [0.25, 0.5, 2.0, 4.0])
def test_phi_homogeneity(m, r):
    x, v = interior_points(50, seed=1)
    deg = 0.5 + 3 * m
    np.testing.assert_allclose(sol.phi(m, r**3 * x, r * v), r**deg * np.asarray(sol.phi(m, x, v)), rtol=1e-10)


@pytest.mark.parametrize("m", [-1, 0, 1, 2])
def test_phi_pde_residual(m):
    x, v = interior_points(500, seed=7)
    lhs = v * np.asarray(sol.phi_dx_chain(m, x, v))
    rhs = np.asarray(sol.phi_dv(m, x, v, 2))
    scale = np.abs(lhs) + np.abs(rhs)
    assert np.max(np.abs(lhs - rhs) / scale) <= 1e-7


def test_phi_dv_properties():
    assert sol.phi_dv(0, 1.0, 0.0, 2) == pytest.approx(0.0, abs=1e-14)
    x = RNG.uniform(0.01, 1.0, 200)
    v = RNG.uniform(-2.0, 2.0, 200)
    assert np.all(np.asarray(sol.phi_dv(0, x, v, 1)) < 0)
    h = 1e-5
    fd = (sol.phi(0, 1.0, 0.3 + h) - sol.phi(0, 1.0, 0.3 - h)) / (2 * h)
    assert sol.phi_dv(0, 1.0, 0.3, 1) == pytest.approx(fd, rel=1e-6)


@pytest.mark.parametrize("m", [-1, 0, 1, 2])
def test_phi_c1_matching_at_zero(m):
    x = np.array([0.05, 0.3, 1.0, 4.0])
    d = 1e-10
    for k in (0, 1):
        lo = np.asarray(sol.phi_dv(m, x, -d, k, branch="negative"))
        hi = np.asarray(sol.phi_dv(m, x, d, k, branch="positive"))
        np.testing.assert_allclose(hi, lo, rtol=1e-8)


def test_phi_dx_recursion():
    x, v = interior_points(40, seed=3)
    np.testing.assert_allclose(sol.phi_dx(0, x, v), np.asarray(sol.phi(-1, x, v)) / 36.0, rtol=1e-12)
    h = 1e-6
    fd = (sol.phi(1, 1.0 + h, -1.0) - sol.phi(1, 1.0 - h, -1.0)) / (2 * h)
    assert sol.phi_dx(1, 1.0, -1.0) == pytest.approx(fd, rel=1e-6)
    np.testing.assert_allclose(sol.phi_dx(-1, x, v), sol.phi_dx_chain(-1, x, v), rtol=1e-8)


def test_phi_sign():
    x = RNG.uniform(1e-3, 2.0, 300)
    v = RNG.uniform(0.0, 2.0, 300)
    for m in (0, 1, 2):
        assert np.all(np.asarray(sol.phi(m, x, v)) >= 0)
    assert np.all(np.asarray(sol.phi(0, x, -v)) > 0)


def test_phi_gamma_minus_flatness():
    u = np.linspace(1024, 4096, 16)
    slope = np.polyfit(u, np.log(np.asarray(sol.phi(0, 1 / u, 1.0))), 1)[0]
    assert slope == pytest.approx(-1 / 9, rel=0.02)


def test_phi_smooth_in_incoming_region():
    # derivative bounds on {x <= v^{3+ε}} do not move when the sample is refined
    sups = []
    for n in (2000, 8000):
        v = np.random.default_rng(n).uniform(0.05, 1.0, n)
        x = v ** 3.5 * np.random.default_rng(n + 1).uniform(0.01, 1.0, n)
        sups.append(max(float(np.max(np.abs(sol.phi_dv(0, x, v, k)))) for k in (1, 2, 3)))
    assert np.isfinite(sups).all() and sups[1] == pytest.approx(sups[0], rel=0.2)


def test_phi_domain_errors():
    with pytest.raises(DomainError):
        sol.phi(0, -1.0, 0.0)
    with pytest.raises(DomainError):
        sol.phi(-1, 0.0, -1.0)
    assert sol.phi(-1, 0.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        sol.phi_dv(0, 0.0, 1.0, 1)


# ---------------------------------------------------------------- ψ family


def test_psi0_against_mpmath():
    x, v = interior_points(25, seed=11)
    ref = np.array([mp_psi0(xi, vi) for xi, vi in zip(x, v)])
    np.testing.assert_allclose(sol.psi(0, x, v), ref, rtol=1e-9)


@pytest.mark.parametrize("l", [0, 1, 2])
@pytest.mark.parametrize("r", [0.25, 0.5, 2.0, 4.0])
def test_psi_homogeneity(l, r):
    x, v = interior_points(50, seed=2)
    np.testing.assert_allclose(sol.psi(l, r**3 * x, r * v), r ** (2 + 3 * l) * np.asarray(sol.psi(l, x, v)), rtol=1e-10)


def test_psi_dx_recursion():
    x, v = interior_points(40, seed=4)
    np.testing.assert_allclose(sol.psi_dx(1, x, v), 5 / 3 * np.asarray(sol.psi(0, x, v)), rtol=1e-12)
    h = 1e-6
    fd = (sol.psi(1, 1.0 + h, -0.5) - sol.psi(1, 1.0 - h, -0.5)) / (2 * h)
    assert sol.psi_dx(1, 1.0, -0.5) == pytest.approx(fd, rel=1e-6)
    r = 0.5
    np.testing.assert_allclose(sol.psi_dx(1, r**3 * x, r * v), r**2 * np.asarray(sol.psi_dx(1, x, v)), rtol=1e-10)
    with pytest.raises(FamilyIndexError):
        sol.psi_dx(0, 1.0, 0.0)


def test_psi_dv_and_pde():
    h = 1e-5
    fd = (sol.psi(0, 1.0, 0.5 + h) - sol.psi(0, 1.0, 0.5 - h)) / (2 * h)
    assert sol.psi_dv(0, 1.0, 0.5, 1) == pytest.approx(fd, rel=1e-6)
    x, v = interior_points(500, seed=9)
    res = np.abs(v * np.asarray(sol.psi_dx_chain(0, x, v)) - np.asarray(sol.psi_dv(0, x, v, 2)))
    assert res.max() <= 1e-7
    # second derivative bounded on H_1
    assert np.max(np.abs(sol.psi_dv(0, x, v, 2))) < 10


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_psi0_derivative_growth_region(k):
    # the sup over the region does not grow as the sample approaches v = 0
    sups = []
    for lo in (0.02, 0.001):
        v = np.random.default_rng(k).uniform(lo, 1.0, 20000)
        x = v ** (k + 1) * np.random.default_rng(k + 10).uniform(1e-3, 1.0, 20000)
        d = np.abs(np.asarray(sol.psi_dv(0, x, v, k)))
        assert np.isfinite(d).all()
        sups.append(d.max())
    assert sups[1] <= 1.05 * sups[0]


def test_psi0_forced():
    assert sol.psi0_forced(0.0, 1.0) == pytest.approx(0.0, abs=1e-15)
    dx, dvv = sol.psi0_forced_derivatives(1.0, -1.0)
    assert -1.0 * dx - dvv == pytest.approx(1.0, abs=1e-7)
    x, v = interior_points(50, seed=5)
    r = 0.5
    np.testing.assert_allclose(sol.psi0_forced(r**3 * x, r * v), r**2 * np.asarray(sol.psi0_forced(x, v)), rtol=1e-10)


def test_psi_sharp_deficit_slope():
    eps, delta = 0.2, 0.5
    v = 0.5 ** np.arange(1, 9)
    x2 = v ** (1 / eps - delta)
    inc = np.abs(np.asarray(sol.psi(0, x2, v)) - np.asarray(sol.psi(0, x2 / 2, v)))
    ratio = inc / (x2 / 2) ** (1 - eps)
    slope = np.polyfit(np.log(v), np.log(ratio), 1)[0]
    assert slope == pytest.approx(-delta * eps, abs=0.1)


# ---------------------------------------------------------- basis, regions


def test_basis_phi():
    x, v = interior_points(30, seed=6)
    np.testing.assert_allclose(sol.basis_Phi(0, x, v), sol.phi(0, x, v), rtol=0)
    np.testing.assert_allclose(sol.basis_Phi(5, x, v), sol.phi_dv(1, x, v, 1), rtol=0)
    np.testing.assert_allclose(sol.basis_Phi(1, x, v), v * np.asarray(sol.phi_dv(0, x, v, 1)), rtol=1e-14)
    with pytest.raises(FamilyIndexError):
        sol.basis_Phi(6, 1.0, 0.0)


def test_basis_phi_transport_identity():
    # (v∂_x - ∂_vv)(vΦ0) = -2∂_vΦ0
    x, v = interior_points(300, seed=8)
    dx = np.asarray(sol.phi_dx_chain(0, x, v))
    d1 = np.asarray(sol.phi_dv(0, x, v, 1))
    d2 = np.asarray(sol.phi_dv(0, x, v, 2))
    lhs = v * (v * dx) - (2 * d1 + v * d2)
    assert np.max(np.abs(lhs + 2 * d1) / (np.abs(2 * d1) + np.abs(v * d2) + 1e-300)) <= 1e-7


def test_region_classify():
    assert sol.region_classify(1, 2).tag == "RMinus"
    assert sol.region_classify(1, -2).tag == "RPlus"
    assert sol.region_classify(1, 0.5).tag == "RZero"
    assert sol.region_classify(1, 1).tag == "RZero"  # ties go to R^0
    assert sol.region_classify(0.01, 0.5, eps=0.5) == sol.RMinus(0.5)
    with pytest.raises(DomainError):
        sol.region_classify(0.0, 1.0)


def test_envelope_examples():
    e = sol.envelope(0, 1.0, 0.0)
    assert e.value == pytest.approx(1.0) and e.region.tag == "RZero"
    e = sol.envelope(0, 0.001, -1.0)
    assert e.value == pytest.approx(1.0) and e.region.tag == "RPlus"
    with pytest.raises(RegionError):
        sol.envelope(1, 0.001, -1.0)


def test_envelope_ratio_bound():
    from grazing.acceptance import ENVELOPE_C, envelope_sample

    x, v = envelope_sample()
    ratio = np.asarray(sol.envelope_ratio(0, x, v))
    assert ratio.min() >= 1 / ENVELOPE_C and ratio.max() <= ENVELOPE_C
    # frozen regression values
    assert ratio.min() == pytest.approx(0.20982, abs=1e-4)
    assert ratio.max() == pytest.approx(1.0314, abs=1e-3)
