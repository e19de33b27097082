"""Regularity probes near the grazing set.

Everything here works on a stationary evaluable ``f(x, v)`` (vectorized) or
on an FD ``Field``.  Samples are quasi-random points of kinetic cylinders,
so samples of cylinders centred at the grazing origin are exact dilations of
one another and exactly homogeneous inputs give exact exponents.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import integrate
from scipy.stats import qmc

from . import solutions as sol
from .errors import ConvergenceError, DomainError, RegionError, ValidationError
from .fd import Field
from .geometry import KineticCylinder, KineticPoint, sample_cylinder

Evaluable = Callable[[np.ndarray, np.ndarray], np.ndarray]
DICTIONARY_ORDER = 3.0


def _evaluable(f: Union[Evaluable, Field]) -> Evaluable:
    if isinstance(f, Field):
        return lambda x, v: f(x, v)
    if not callable(f):
        raise ValidationError("probe input must be callable or a Field")
    return f


def _as_point(z0) -> KineticPoint:
    if isinstance(z0, KineticPoint):
        if z0.n != 1:
            raise ValidationError("probes work in one dimension")
        return z0
    t, x, v = z0
    return KineticPoint(t, x, v)


def _require_grazing(z0: KineticPoint) -> None:
    if z0.x[0] != 0.0 or z0.v[0] != 0.0:
        raise DomainError("expected a grazing point (x = 0, v = 0)")


def _loglog_fit(r: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """OLS slope of log y against log r, jackknife half-width (2 SE), RMS residual."""
    lr, ly = np.log(r), np.log(y)
    A = np.column_stack([np.ones_like(lr), lr])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    k = lr.size
    loo = []
    for i in range(k):
        keep = np.arange(k) != i
        c, *_ = np.linalg.lstsq(A[keep], ly[keep], rcond=None)
        loo.append(c[1])
    loo = np.array(loo)
    se = math.sqrt((k - 1) / k * float(np.sum((loo - loo.mean()) ** 2)))
    return float(coef[1]), 2.0 * se, float(np.sqrt(np.mean(resid**2)))


# ------------------------------------------------------------ Hölder probe


@dataclass
class ExponentEstimate:
    alpha_hat: float
    ci_half_width: float
    scales_used: list
    fit_residual: float
    saturated: bool = False
    oscillations: list = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def scale_table(self) -> str:
        """CSV r,osc,fit."""
        r = np.asarray(self.scales_used)
        osc = np.asarray(self.oscillations)
        lines = ["r,osc,fit"]
        if r.size:
            c = np.exp(np.mean(np.log(osc) - self.alpha_hat * np.log(r)))
            for ri, oi in zip(r, osc):
                lines.append(f"{float(ri)!r},{float(oi)!r},{float(c * ri ** self.alpha_hat)!r}")
        return "\n".join(lines) + "\n"


def _check_scales(scales: Sequence[float]) -> np.ndarray:
    r = np.asarray(scales, dtype=float)
    if r.ndim != 1 or r.size < 4:
        raise ValidationError("need at least 4 scales")
    if np.any(r <= 0) or np.any(np.diff(r) >= 0):
        raise ValidationError("scales must be positive and strictly decreasing")
    return r


def default_scales(k0: int = 1, k1: int = 8) -> list[float]:
    return [2.0**-k for k in range(k0, k1 + 1)]


def holder_exponent(
    f: Union[Evaluable, Field],
    z0=(0.0, 0.0, 0.0),
    scales: Sequence[float] = tuple(default_scales()),
    n_points: int = 256,
    half_space: Optional[bool] = None,
) -> ExponentEstimate:
    """Slope of log osc(f; Q_r(z0)) against log r.

    The cylinder is cut with {x > 0} whenever it reaches the wall (or when
    ``half_space`` is set).  Slopes above the dictionary order 3 are
    reported as 3 with ``saturated``.
    """
    fun = _evaluable(f)
    z = _as_point(z0)
    r = _check_scales(scales)
    if n_points < 256:
        raise ValidationError("at least 256 points per cylinder")
    osc = []
    for ri in r:
        hs = half_space if half_space is not None else z.x[0] - ri**3 - ri * ri * abs(z.v[0]) <= 0.0
        s = sample_cylinder(KineticCylinder(z, ri, hs), n_points)
        vals = np.asarray(fun(s.x, s.v), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("non-finite values on the sample")
        osc.append(float(vals.max() - vals.min()))
    osc = np.array(osc)
    if np.all(osc == 0.0):
        return ExponentEstimate(DICTIONARY_ORDER, 0.0, r.tolist(), 0.0, True, osc.tolist())
    if np.any(osc <= 0.0):
        raise ConvergenceError("oscillation vanished on part of the ladder")
    alpha, ci, res = _loglog_fit(r, osc)
    saturated = alpha > DICTIONARY_ORDER
    return ExponentEstimate(
        min(alpha, DICTIONARY_ORDER), ci, r.tolist(), res, bool(saturated), osc.tolist()
    )


# ---------------------------------------------------------- expansion fit

DICTIONARY = ("1", "t", "x", "v", "v^2", "v^3", "phi0", "v*phi0", "v^2*phi0", "psi0", "v*psi0", "dv_phi1")


def dictionary_columns(t: np.ndarray, x: np.ndarray, v: np.ndarray) -> np.ndarray:
    p0 = sol.phi(0, x, v)
    q0 = sol.psi(0, x, v)
    return np.column_stack(
        [np.ones_like(x), t, x, v, v**2, v**3, p0, v * p0, v * v * p0, q0, v * q0, sol.phi_dv(1, x, v, 1)]
    )


@dataclass
class ExpansionFit:
    names: tuple
    radii: list
    coefficients: np.ndarray  # (n_radii, n_terms)
    ci_half_width: np.ndarray  # (n_radii, n_terms)
    residual: list  # RMS residual per radius
    residual_order: float
    stable: bool

    def coefficient(self, name: str, level: int = -1) -> float:
        return float(self.coefficients[level, self.names.index(name)])

    def to_json(self) -> str:
        return json.dumps(
            {
                "names": list(self.names),
                "radii": list(self.radii),
                "coefficients": self.coefficients.tolist(),
                "ci_half_width": self.ci_half_width.tolist(),
                "residual": list(self.residual),
                "residual_order": self.residual_order,
                "stable": self.stable,
            },
            sort_keys=True,
        )


def expansion_fit(
    f: Union[Evaluable, Field],
    z0=(0.0, 0.0, 0.0),
    radii: Sequence[float] = (0.5, 0.25, 0.125, 0.0625),
    n_points: int = 512,
    rcond: float = 1e-12,
) -> ExpansionFit:
    """Least squares of f against the grazing dictionary on each Q_r ∩ {x > 0}.

    Columns are scaled to unit norm before the solve.  The CI is two
    standard errors from the residual variance.
    """
    fun = _evaluable(f)
    z = _as_point(z0)
    _require_grazing(z)
    r = np.asarray(radii, dtype=float)
    if r.size < 2 or np.any(np.diff(r) >= 0) or np.any(r <= 0):
        raise ValidationError("radii must be positive, strictly decreasing, at least 2")
    p = len(DICTIONARY)
    coefs = np.empty((r.size, p))
    cis = np.empty((r.size, p))
    resid = []
    for k, ri in enumerate(r):
        s = sample_cylinder(KineticCylinder(z, ri, True), n_points)
        A = dictionary_columns(s.t, s.x, s.v)
        y = np.asarray(fun(s.x, s.v), dtype=float)
        norms = np.linalg.norm(A, axis=0)
        if np.any(norms == 0):
            raise ValidationError("dictionary column vanishes on the sample")
        As = A / norms
        u, sv, vt = np.linalg.svd(As, full_matrices=False)
        if sv[-1] < rcond * sv[0]:
            raise ValidationError(
                f"dictionary is rank deficient at radius {ri:g} (condition {sv[0] / sv[-1]:.3g})"
            )
        c = vt.T @ ((u.T @ y) / sv)
        e = y - As @ c
        dof = max(1, y.size - p)
        sigma2 = float(e @ e) / dof
        cov = (vt.T / sv**2) @ vt
        coefs[k] = c / norms
        cis[k] = 2.0 * np.sqrt(sigma2 * np.diag(cov)) / norms
        resid.append(float(np.sqrt(np.mean(e**2))))
    resid_arr = np.array(resid)
    if np.all(resid_arr > 0) and r.size >= 2:
        order = float(np.polyfit(np.log(r), np.log(resid_arr), 1)[0])
    else:
        order = math.inf
    diff = np.abs(coefs[-1] - coefs[-2])
    tol = np.maximum(cis[-1] + cis[-2], 1e-9 * np.maximum(1.0, np.abs(coefs[-1])))
    return ExpansionFit(DICTIONARY, r.tolist(), coefs, cis, resid, order, bool(np.all(diff <= tol)))


# ------------------------------------------------------ quotient Lipschitz


@dataclass(frozen=True)
class QuotientReport:
    seminorm: float
    radius: float
    n_points: int
    n_pairs: int


def _quotient_sample(r: float, n_points: int) -> tuple[np.ndarray, np.ndarray]:
    eng = qmc.Sobol(d=2, scramble=False)
    eng.fast_forward(1)
    xs, vs = [], []
    count = 0
    while count < n_points:
        u = eng.random(1024)
        x = r**3 * u[:, 0]
        v = r * (2.0 * u[:, 1] - 1.0)
        keep = (x > 0) & ~((v > 0) & (x <= v**3))
        xs.append(x[keep])
        vs.append(v[keep])
        count += int(keep.sum())
    return np.concatenate(xs)[:n_points], np.concatenate(vs)[:n_points]


def quotient_lipschitz(
    f: Union[Evaluable, Field],
    z0=(0.0, 0.0, 0.0),
    region: Optional[sol.Region] = None,
    radius: float = 0.5,
    n_points: int = 256,
) -> QuotientReport:
    """sup |q(p) - q(p')| / dist(p, p') with q = f/φ0 on H_r(z0) ∖ R^-.

    Pairs are taken at equal time, where the kinetic distance is
    max(|Δx|^{1/3}, |Δv|/2).  ``region`` may restrict the sample to R^0 or
    R^+; asking for R^- is an error.
    """
    fun = _evaluable(f)
    z = _as_point(z0)
    _require_grazing(z)
    if region is not None and region.tag == "RMinus":
        raise RegionError("quotient_lipschitz is not defined on the incoming region")
    if not radius > 0:
        raise ValidationError("radius must be positive")
    x, v = _quotient_sample(radius, n_points * (3 if region is not None else 1))
    if region is not None:
        codes = sol._region_codes(x, v)
        keep = codes == (0 if region.tag == "RZero" else 1)
        x, v = x[keep][:n_points], v[keep][:n_points]
    if x.size < 2:
        raise RegionError("empty sample in the requested region")
    q = np.asarray(fun(x, v), dtype=float) / np.asarray(sol.phi(0, x, v), dtype=float)
    if not np.all(np.isfinite(q)):
        raise ValidationError("quotient is not finite on the sample")
    i, j = np.triu_indices(x.size, 1)
    dist = np.maximum(np.abs(x[i] - x[j]) ** (1 / 3), 0.5 * np.abs(v[i] - v[j]))
    ratio = np.abs(q[i] - q[j]) / dist
    return QuotientReport(float(ratio.max()), float(radius), int(x.size), int(i.size))


# ------------------------------------------------------------ C^{3-ε} check


@dataclass
class C3Report:
    order: float
    saturated: bool
    deficit_slope: float
    eps: float
    delta: float
    v: list
    increments: list


def psi_sharp_ratio(f: Evaluable, eps: float, delta: float, v: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """|f(x2, v) - f(x1, v)| / |x2 - x1|^{1-ε} with x2 = v^{1/ε-δ}, x1 = x2/2."""
    v = np.asarray(v, dtype=float)
    x2 = v ** (1.0 / eps - delta)
    x1 = 0.5 * x2
    inc = np.abs(np.asarray(f(x2, v), dtype=float) - np.asarray(f(x1, v), dtype=float))
    return inc / (x2 - x1) ** (1.0 - eps), inc, x2 - x1


def c3_region_check(
    f: Union[Evaluable, Field],
    eps: float,
    z0=(0.0, 0.0, 0.0),
    delta: float = 0.0,
    v_ladder: Optional[Sequence[float]] = None,
) -> C3Report:
    """Local order of f along {x ≤ v^{1/ε-δ}} near the grazing origin.

    At each v of the ladder the pair x2 = v^{1/ε-δ}, x1 = x2/2 stays in the
    region; the x-increment annihilates every polynomial in v, and a
    polynomial of kinetic degree ≤ 3 leaves at most c·|Δx| = c·d³ with
    d = |Δx|^{1/3} the kinetic length of the pair.  The order is the slope
    of log |Δf| against log d (capped at 3); the deficit slope is the slope
    of log(|Δf| / |Δx|^{1-ε}) against log v.
    """
    fun = _evaluable(f)
    z = _as_point(z0)
    _require_grazing(z)
    if not 0 < eps < 1:
        raise ValidationError("eps must lie in (0, 1)")
    if delta < 0 or 1.0 / eps - delta <= 0:
        raise ValidationError("delta must satisfy 0 <= delta < 1/eps")
    v = np.asarray(v_ladder if v_ladder is not None else 0.5 ** np.arange(1, 9), dtype=float)
    v = v[v > 0]
    if v.size < 4:
        raise ValidationError("empty or too short sample ladder in the region")
    ratio, inc, dx = psi_sharp_ratio(fun, eps, delta, v)
    keep = dx > 0
    if np.all(inc[keep] == 0):
        return C3Report(DICTIONARY_ORDER, True, 0.0, eps, delta, v.tolist(), inc.tolist())
    if np.any(inc[keep] <= 0):
        raise ConvergenceError("increment vanished on part of the ladder")
    d = dx[keep] ** (1.0 / 3.0)
    order = float(np.polyfit(np.log(d), np.log(inc[keep]), 1)[0])
    deficit = float(np.polyfit(np.log(v[keep]), np.log(ratio[keep]), 1)[0])
    saturated = order > DICTIONARY_ORDER
    return C3Report(min(order, DICTIONARY_ORDER), bool(saturated), deficit, eps, delta, v.tolist(), inc.tolist())


# --------------------------------------------------------------- γ₋ decay


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    inverse_x: tuple
    log_values: tuple
    decays: bool


def gamma_minus_decay(f: Union[Evaluable, Field], v0: float, R: float = 1.0, n: int = 16) -> DecayFit:
    """Fit log f(x, v0) = slope/x + c on x ∈ [x_max/4, x_max], x_max = R³/2^{10}.

    Samples that underflow to zero at the small-x end are dropped; at least
    four must remain.
    """
    fun = _evaluable(f)
    if not v0 > 0 or not R > 0:
        raise ValidationError("v0 and R must be positive")
    x_max = R**3 / 2**10
    u = np.linspace(1.0 / x_max, 4.0 / x_max, n)
    vals = np.asarray(fun(1.0 / u, np.full(n, float(v0))), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValidationError("non-positive samples")
    pos = vals > 0
    if not np.all(pos):
        first_zero = int(np.argmin(pos))
        # only a trailing run of underflows is acceptable
        if np.any(pos[first_zero:]) or (first_zero > 0 and vals[first_zero - 1] > 1e-250):
            raise ValidationError("non-positive samples")
    if pos.sum() < 4:
        raise ValidationError("too few positive samples before underflow")
    lu, lf = u[pos], np.log(vals[pos])
    slope, intercept = np.polyfit(lu, lf, 1)
    scale = max(1.0, float(np.max(np.abs(lf))))
    decays = bool(slope * (lu[-1] - lu[0]) < -1e-8 * scale)
    return DecayFit(float(slope), float(intercept), tuple(lu.tolist()), tuple(lf.tolist()), decays)


# ---------------------------------------------------------------- Harnack


@dataclass(frozen=True)
class HarnackReport:
    ratio: float
    sup: float
    inf: float
    contained: bool


def _slanted_set(x0: float, v0: float, R: float, theta: float, gamma: float) -> tuple[float, float]:
    lo = x0 - v0 * R * R * gamma - (theta * R) ** 3
    hi = x0 - v0 * R * R * gamma + (theta * R) ** 3
    shift = -v0 * (theta * R) ** 2  # t runs over (-(θR)², 0]
    return min(lo, lo + shift), max(hi, hi + shift)


def harnack_ratio(
    field_or_f: Union[Field, Evaluable],
    x0: float,
    v0: float,
    R: float = 1.0,
    theta: float = 0.1,
    gamma: float = 0.25,
    n_side: int = 64,
) -> HarnackReport:
    """sup over A_γ × B_{θR}(v0) divided by inf over A_0 × B_{θR}(v0).

    A_γ = {x : |x - x0 - v0(t - γR²)| < (θR)³ for some t ∈ (-(θR)², 0]}.
    ``contained`` tells whether the parent cylinder of radius R lies in the
    domain of the field (always true for a plain function with x > 0).
    """
    if not (0 < theta < 0.5 and 0 < gamma < 0.5):
        raise ValidationError("theta and gamma must lie in (0, 1/2)")
    if not 0 < R <= 2:
        raise ValidationError("R must lie in (0, 2]")
    fun = _evaluable(field_or_f)
    a_g = _slanted_set(x0, v0, R, theta, gamma)
    a_0 = _slanted_set(x0, v0, R, theta, 0.0)
    vlo, vhi = v0 - theta * R, v0 + theta * R
    parent_x = (x0 - R**3 - max(v0, 0.0) * R * R, x0 + R**3 + max(-v0, 0.0) * R * R)
    if isinstance(field_or_f, Field):
        g = field_or_f.grid
        box = (0.0, g.X, -g.V, g.V)
    else:
        box = (0.0, math.inf, -math.inf, math.inf)
    contained = parent_x[0] > box[0] and parent_x[1] < box[1] and v0 - R > box[2] and v0 + R < box[3]

    def values(ax: tuple[float, float]) -> np.ndarray:
        xlo, xhi = max(ax[0], box[0]), min(ax[1], box[1])
        vl, vh = max(vlo, box[2]), min(vhi, box[3])
        if not (xlo < xhi and vl < vh):
            raise ValidationError("empty intersection with the domain")
        xs = np.linspace(xlo, xhi, n_side + 2)[1:-1]
        vs = np.linspace(vl, vh, n_side + 2)[1:-1]
        X, V = np.meshgrid(xs, vs, indexing="ij")
        return np.asarray(fun(X, V), dtype=float)

    sup = float(values(a_g).max())
    low = values(a_0)
    if np.any(low < 0):
        raise ValidationError("harnack_ratio needs a nonnegative function")
    inf = float(low.min())
    if inf <= 0:
        raise ConvergenceError("infimum vanishes; ratio is unbounded")
    return HarnackReport(sup / inf, sup, inf, bool(contained))


# ---------------------------------------------- diffuse counterexample


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C^∞ step: 0 for s <= 0, 1 for s >= 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    a = np.exp(-1.0 / s[inside])
    b = np.exp(-1.0 / (1.0 - s[inside]))
    out[inside] = a / (a + b)
    out[s >= 1] = 1.0
    return out


def cutoff(v) -> np.ndarray:
    """1 on |v| <= 2, 0 on |v| >= 3.5."""
    return 1.0 - _smooth_step((np.abs(np.asarray(v, dtype=float)) - 2.0) / 1.5)


def xi(v) -> np.ndarray:
    """2 on v >= -1, 0 on v <= -2."""
    return 2.0 * _smooth_step(np.asarray(v, dtype=float) + 2.0)


@dataclass
class DiffuseCounterexample:
    a: float
    flux_phi: float  # ∫ φ0(0,w)·cutoff(w) w_- dw
    flux_xi: float  # ∫ ξ(w) e^{-w²} w_- dw
    normalization_residual: float
    exponent_origin: Optional[ExponentEstimate] = None
    exponent_interior: Optional[ExponentEstimate] = None

    def __call__(self, x, v) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self.a * sol.phi(0, x, v) * cutoff(v) + xi(v) * np.exp(-v * v)

    def wall_flux(self) -> float:
        """∫ f̃(0, w) w_- dw by composite Gauss-Legendre (independent of quad)."""
        gx, gw = np.polynomial.legendre.leggauss(40)
        edges = np.concatenate([-np.geomspace(12.0, 1e-12, 240), [0.0]])
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            w = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
            vals = self.a * (9.0 ** (-1.0 / 6.0)) * np.sqrt(-w) * cutoff(w) + xi(w) * np.exp(-w * w)
            total += 0.5 * (hi - lo) * float(np.sum(gw * vals * -w))
        return total


def build_diffuse_counterexample(scales: Sequence[float] = tuple(default_scales(8, 14))) -> DiffuseCounterexample:
    """f̃ = a·φ0·cutoff + ξ(v)e^{-v²} with ∫ f̃(0, w) w_- dw = 1.

    Then the wall density M(v) = 2e^{-v²} reproduces f̃ on {x = 0, v > 0},
    since φ0 vanishes there and ξ = 2.  The report holds the normalization
    residual and the exponents at the grazing origin and at (x, v) = (1, 0).
    """
    trace = lambda w: 9.0 ** (-1.0 / 6.0) * math.sqrt(-w) * float(cutoff(w))
    opts = dict(epsabs=1e-14, epsrel=1e-13, limit=200)
    try:
        flux_phi = integrate.quad(lambda w: trace(w) * -w, -4.0, 0.0, points=[-3.5, -2.0], **opts)[0]
        flux_xi = integrate.quad(lambda w: float(xi(w)) * math.exp(-w * w) * -w, -3.0, 0.0, points=[-2.0, -1.0], **opts)[0]
    except Exception as exc:  # noqa: BLE001
        raise ConvergenceError(f"quadrature failed: {exc}") from exc
    if abs(1.0 - flux_xi) < 1e-12:
        raise ValidationError("cutoff gives unit flux; the construction needs it different from 1")
    a = (1.0 - flux_xi) / flux_phi
    out = DiffuseCounterexample(a, flux_phi, flux_xi, math.nan)
    out.normalization_residual = abs(out.wall_flux() - 1.0)
    out.exponent_origin = holder_exponent(out, (0.0, 0.0, 0.0), scales)
    out.exponent_interior = holder_exponent(out, (0.0, 1.0, 0.0), scales)
    return out
