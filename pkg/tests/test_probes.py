import json
import math

import numpy as np
import pytest

from grazing import fd, probes
from grazing import solutions as sol
from grazing.errors import ConvergenceError, RegionError, ValidationError

PHI0 = lambda x, v: sol.phi(0, x, v)
PSI0 = lambda x, v: sol.psi(0, x, v)


# ------------------------------------------------------------ exponents


@pytest.mark.parametrize(
    "f,beta",
    [(PHI0, 0.5), (PSI0, 2.0), (lambda x, v: v + 0 * x, 1.0), (lambda x, v: sol.phi(1, x, v), 3.0)],
)
def test_exponent_calibration(f, beta):
    est = probes.holder_exponent(f)
    assert abs(est.alpha_hat - beta) <= 0.05
    assert est.ci_half_width >= 0 and len(est.scales_used) == 8


def test_exponent_saturation():
    est = probes.holder_exponent(lambda x, v: sol.phi(1, x, v))
    assert est.saturated and est.alpha_hat == 3.0
    const = probes.holder_exponent(lambda x, v: np.ones_like(x))
    assert const.saturated
    assert not probes.holder_exponent(PHI0).saturated


def test_exponent_scale_equivariance():
    r = 0.5
    base = probes.holder_exponent(PHI0)
    scaled = probes.holder_exponent(lambda x, v: sol.phi(0, r**3 * x, r * v))
    assert abs(scaled.alpha_hat - base.alpha_hat) <= max(base.ci_half_width, 1e-9)
    # osc(f∘S_r; Q_s) = osc(f; Q_{rs}) = r^α osc(f; Q_s)
    np.testing.assert_allclose(np.array(scaled.oscillations) / np.array(base.oscillations), r**0.5, rtol=1e-10)


def test_exponent_at_interior_point():
    est = probes.holder_exponent(PHI0, z0=(0.0, 1.0, 0.0))
    assert est.alpha_hat >= 1.0


def test_exponent_validation_and_outputs():
    with pytest.raises(ValidationError):
        probes.holder_exponent(PHI0, scales=[0.5, 0.25, 0.125])
    with pytest.raises(ValidationError):
        probes.holder_exponent(PHI0, scales=[0.5, 0.25, 0.3, 0.1])
    with pytest.raises(ValidationError):
        probes.holder_exponent(PHI0, n_points=100)
    est = probes.holder_exponent(PHI0)
    rec = json.loads(est.to_json())
    assert rec["alpha_hat"] == pytest.approx(0.5)
    table = est.scale_table().splitlines()
    assert table[0] == "r,osc,fit" and len(table) == 9


# ------------------------------------------------------------ expansion

SYNTH_TRUTH = {"phi0": 2.0, "psi0": 1.0, "1": 1.0, "v": 1.0}


def synth(x, v):
    return 2 * sol.phi(0, x, v) + sol.psi(0, x, v) + 1 + v


@pytest.mark.parametrize("radii", [(0.5, 0.25, 0.125, 0.0625), (0.4, 0.2, 0.1, 0.05)])
def test_expansion_recovers_synthetic(radii):
    fit = probes.expansion_fit(synth, radii=radii)
    for name in probes.DICTIONARY:
        assert abs(fit.coefficient(name) - SYNTH_TRUTH.get(name, 0.0)) <= 1e-2
    assert fit.stable
    assert json.loads(fit.to_json())["names"] == list(probes.DICTIONARY)


def test_expansion_noise_perturbation():
    clean = probes.expansion_fit(PHI0)
    rng = np.random.default_rng(0)
    noisy_f = lambda x, v: sol.phi(0, x, v) + 1e-6 * rng.standard_normal(np.shape(x))
    noisy = probes.expansion_fit(noisy_f)
    assert abs(clean.coefficient("phi0") - 1.0) <= 1e-6
    assert abs(noisy.coefficient("phi0") - 1.0) <= 1e-3


def test_expansion_of_fd_solution_converges():
    coefs = []
    for n in (64, 128, 256, 512):
        f = fd.solve(fd.assemble(fd.GridSpec(1.0, 1.0, n, n), 1.0, 0.0, fd.Inflow(PHI0)))
        coefs.append(probes.expansion_fit(f, radii=(0.9, 0.7, 0.5, 0.4)).coefficient("phi0", 0))
    errs = np.abs(np.array(coefs) - 1.0)
    # first-order approach to the exact coefficient
    assert np.all(errs[1:] / errs[:-1] < 0.6)
    assert abs(2 * coefs[-1] - coefs[-2] - 1.0) <= 0.05
    np.testing.assert_allclose(coefs, [1.8611, 1.4486, 1.2113, 1.0882], atol=1e-3)


def test_expansion_errors():
    with pytest.raises(ValidationError):
        probes.expansion_fit(PHI0, radii=(0.5,))
    with pytest.raises(ValidationError):
        probes.expansion_fit(PHI0, z0=(0.0, 1.0, 0.0))


# ------------------------------------------------------------- quotient


def test_quotient_of_phi0_vanishes():
    assert probes.quotient_lipschitz(PHI0).seminorm == 0.0
    for c in (3.0, -0.25):
        assert probes.quotient_lipschitz(lambda x, v: c * sol.phi(0, x, v)).seminorm <= 1e-12


def test_quotient_sharp_example_does_not_vanish():
    f = lambda x, v: sol.phi(0, x, v) + v**2 * sol.phi_dv(0, x, v, 1)
    semis = [probes.quotient_lipschitz(f, radius=r).seminorm for r in (0.5, 0.125, 0.03125)]
    assert all(math.isfinite(s) and s > 0 for s in semis)
    assert abs(np.polyfit(np.log([0.5, 0.125, 0.03125]), np.log(semis), 1)[0]) <= 0.1


def lipschitz_bound(r):
    """Dense-grid upper bound 2 sup|∂_v q| + sup_x |Δq|/|Δx|^{1/3} for q = 1 + v²∂_vφ0/φ0."""
    q = lambda x, v: 1 + v**2 * sol.phi_dv(0, x, v, 1) / sol.phi(0, x, v)
    X, V = np.meshgrid(np.geomspace(1e-9, r**3, 300), np.linspace(-r, r, 3001), indexing="ij")
    ok = ~((V > 0) & (X <= V**3))
    Q = np.where(ok, q(X, np.where(ok, V, -1.0)), np.nan)
    dv = np.abs(np.diff(Q, axis=1)) / np.diff(V, axis=1)
    bound_v = 2 * np.nanmax(dv)
    bound_x = 0.0
    for vv in np.linspace(-r, r, 201):
        xx = np.geomspace(1e-12, r**3, 400)
        xx = xx[~((vv > 0) & (xx <= vv**3))]
        if xx.size < 2:
            continue
        qq = q(xx, np.full_like(xx, vv))
        D = np.abs(qq[:, None] - qq[None, :]) / np.maximum(np.abs(xx[:, None] - xx[None, :]), 1e-300) ** (1 / 3)
        bound_x = max(bound_x, float(D.max()))
    return bound_v, bound_x


@pytest.mark.slow
def test_quotient_sharp_example_refinement():
    # nested samples: the sampled sup increases toward the true constant
    f = lambda x, v: sol.phi(0, x, v) + v**2 * sol.phi_dv(0, x, v, 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        bound_v, bound_x = lipschitz_bound(0.5)
    semis = [probes.quotient_lipschitz(f, radius=0.5, n_points=n).seminorm for n in (256, 1024, 4096)]
    assert np.all(np.diff(semis) >= 0)
    assert semis[-1] <= bound_v + bound_x
    assert semis[-1] >= 0.8 * bound_v


def test_quotient_of_psi0_shrinks():
    semis = [probes.quotient_lipschitz(PSI0, radius=r).seminorm for r in (0.5, 0.125, 0.03125)]
    assert semis[0] > semis[1] > semis[2]
    slope = np.polyfit(np.log([0.5, 0.125, 0.03125]), np.log(semis), 1)[0]
    assert slope == pytest.approx(0.5, abs=0.05)


def test_quotient_regions():
    f = lambda x, v: sol.phi(0, x, v) * (1 + v)
    for tag in ("R_ZERO", "R_PLUS"):
        rep = probes.quotient_lipschitz(f, region=getattr(sol, tag), n_points=128)
        assert 2 <= rep.n_points <= 128 and math.isfinite(rep.seminorm)
    with pytest.raises(RegionError):
        probes.quotient_lipschitz(PHI0, region=sol.RMinus())
    with pytest.raises(ValidationError):
        probes.quotient_lipschitz(PHI0, radius=0.0)


# -------------------------------------------------------------- C^{3-ε}


def test_c3_psi0_order():
    rep = probes.c3_region_check(PSI0, 0.2)
    assert rep.order >= 3 - 3 * 0.2 - 0.1


def test_c3_psi0_deficit_slope():
    rep = probes.c3_region_check(PSI0, 0.2, delta=0.5)
    assert rep.deficit_slope == pytest.approx(-0.5 * 0.2, abs=0.05)


def test_c3_polynomial_saturates():
    rep = probes.c3_region_check(lambda x, v: 1 + v + v**2 + x + v**3, 0.2)
    assert rep.order >= 3.0 - 1e-9
    flat = probes.c3_region_check(lambda x, v: 1 + v + v**3 + 0 * x, 0.2)
    assert flat.saturated and flat.order == 3.0


def test_c3_validation():
    with pytest.raises(ValidationError):
        probes.c3_region_check(PSI0, 1.5)
    with pytest.raises(ValidationError):
        probes.c3_region_check(PSI0, 0.2, delta=5.0)
    with pytest.raises(ValidationError):
        probes.c3_region_check(PSI0, 0.2, v_ladder=[0.5, 0.25])


# ------------------------------------------------------------------ decay


@pytest.mark.parametrize("v0", [1.0, 2.0])
def test_gamma_minus_decay_constant(v0):
    fit = probes.gamma_minus_decay(PHI0, v0, R=v0)
    assert fit.decays
    assert fit.slope == pytest.approx(-(v0**3) / 9, rel=0.02)


def test_no_decay_for_constant():
    fit = probes.gamma_minus_decay(lambda x, v: np.ones_like(x), 1.0)
    assert not fit.decays and fit.slope == 0.0


def test_decay_errors():
    with pytest.raises(ValidationError):
        probes.gamma_minus_decay(PHI0, 0.0)
    with pytest.raises(ValidationError):
        probes.gamma_minus_decay(lambda x, v: -np.ones_like(x), 1.0)


# ---------------------------------------------------------------- Harnack


def test_harnack_constant_and_phi0():
    assert probes.harnack_ratio(lambda x, v: np.ones_like(x), 1.0, 0.0).ratio == 1.0
    rep = probes.harnack_ratio(PHI0, 1.0, 0.0, 0.5)
    assert rep.contained and 1.0 <= rep.ratio < 2.0


def test_harnack_errors():
    with pytest.raises(ValidationError):
        probes.harnack_ratio(PHI0, 1.0, 0.0, theta=0.6)
    with pytest.raises(ValidationError):
        probes.harnack_ratio(PHI0, 1.0, 0.0, R=3.0)
    with pytest.raises(ConvergenceError):
        probes.harnack_ratio(lambda x, v: np.zeros_like(x), 1.0, 0.0)
    with pytest.raises(ValidationError):
        probes.harnack_ratio(lambda x, v: v + 0 * x, 1.0, 0.0)


# ------------------------------------------------- diffuse counterexample


def test_cutoffs():
    assert np.all(probes.cutoff(np.array([-2.0, 0.0, 1.9])) == 1.0)
    assert np.all(probes.cutoff(np.array([-3.5, 4.0])) == 0.0)
    assert np.all(probes.xi(np.array([-1.0, 0.0, 5.0])) == 2.0)
    assert np.all(probes.xi(np.array([-2.0, -3.0])) == 0.0)
    s = np.linspace(-4, 4, 801)
    assert np.all(np.diff(probes.xi(s)) >= 0)


def test_diffuse_counterexample():
    ce = probes.build_diffuse_counterexample()
    assert ce.normalization_residual <= 1e-8
    assert abs(ce.exponent_origin.alpha_hat - 0.5) <= 0.05
    assert ce.exponent_interior.alpha_hat >= 1.0
    # the wall relation: f̃(0, v) = M(v)·flux with M = 2e^{-v²} and unit flux
    v = np.linspace(0.01, 3.0, 50)
    np.testing.assert_allclose(ce(np.zeros_like(v), v), fd.maxwellian(v), rtol=1e-12)
    assert ce.a == pytest.approx((1 - ce.flux_xi) / ce.flux_phi)
