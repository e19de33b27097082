"""Explicit self-similar solutions of v ∂_x f = ∂_vv f on the half-line x > 0.

Two families are provided.

* φ_m (m >= -1), homogeneous of degree 1/2 + 3m, vanishing on the incoming
  boundary {x = 0, v > 0}:

      φ_m = c_m x^λ U(-λ, 2/3, -v³/9x)                 v < 0
      φ_m = c_m M_m x^λ e^{-v³/9x} U(5/6+m, 2/3, v³/9x)   v >= 0

  with λ = 1/6 + m, M_m = Γ(7/6+m)/Γ(1/6-m) and c_m the sign of M_m.

* ψ_l (l >= 0), homogeneous of degree κ = 3l + 2, whose trace on
  {x = 0, v > 0} is c_λ v^κ:

      ψ_l = x^{κ/3} [M(-κ/3, 2/3, -s) + C w M((1-κ)/3, 4/3, -s)]

  with s = v³/9x and w = v/(9x)^{1/3}.

Both families have the form x^{κ/3} G(w) with G an entire function of w, and
that representation (a power series in w) is used for |s| <= 2.  Away from
v = 0 the Tricomi forms are used, with v-derivatives from parameter shifts
and Faà di Bruno's formula for s(v) = v³/9x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, FamilyIndexError, RegionError
from .specfun import gamma, kummer_m, pochhammer, rgamma, tricomi_u, tricomi_u_scaled

ArrayLike = Union[float, np.ndarray]

NEAR_ZERO_S = 2.0
_SERIES_TERMS = 48  # powers w^{3k}, w^{3k+1} for k < 48
MAX_V_ORDER = 4


# ------------------------------------------------------------------ indices


@dataclass(frozen=True)
class PhiIndex:
    """Index m >= -1 of φ_m and its constants."""

    m: int

    def __post_init__(self) -> None:
        if int(self.m) != self.m or self.m < -1:
            raise FamilyIndexError(f"phi index must be an integer >= -1, got {self.m}")

    @property
    def lam(self) -> float:
        return 1.0 / 6.0 + self.m

    @property
    def a(self) -> float:
        return 5.0 / 6.0 + self.m

    @property
    def M(self) -> float:
        return gamma(7.0 / 6.0 + self.m) / gamma(1.0 / 6.0 - self.m)

    @property
    def c(self) -> float:
        return 1.0 if self.m <= 0 else float((-1) ** self.m)

    @property
    def degree(self) -> float:
        return 3.0 * self.lam


@dataclass(frozen=True)
class PsiIndex:
    """Index l >= 0 of ψ_l and its constants."""

    l: int

    def __post_init__(self) -> None:
        if int(self.l) != self.l or self.l < 0:
            raise FamilyIndexError(f"psi index must be an integer >= 0, got {self.l}")

    @property
    def kappa(self) -> int:
        return 3 * self.l + 2

    @property
    def C(self) -> float:
        k = self.kappa
        return gamma(2 / 3) * gamma((1 - k) / 3) / (gamma(-k / 3) * gamma(4 / 3))

    @property
    def c_lambda(self) -> float:
        """ψ_l(0, v) = c_lambda v^κ for v > 0."""
        k = self.kappa
        bracket = gamma(2 / 3) * rgamma((k + 2) / 3) + self.C * gamma(4 / 3) * rgamma((k + 3) / 3)
        return 9.0 ** (-k / 3) * bracket

    @property
    def u_factor(self) -> float:
        """ψ_l = u_factor · x^{κ/3} U(-κ/3, 2/3, -v³/9x) for v < 0."""
        return gamma((1 - self.kappa) / 3) / gamma(1 / 3)


def _phi_index(m: Union[int, PhiIndex]) -> PhiIndex:
    return m if isinstance(m, PhiIndex) else PhiIndex(int(m) if float(m).is_integer() else m)


def _psi_index(l: Union[int, PsiIndex]) -> PsiIndex:
    return l if isinstance(l, PsiIndex) else PsiIndex(int(l) if float(l).is_integer() else l)


# ---------------------------------------------------------- shared machinery


@dataclass(frozen=True)
class _Family:
    deg3: float  # κ/3: F = x^{deg3} G(v (9x)^{-1/3})
    A: float  # coefficient of M(-κ/3, 2/3, -s)
    B: float  # coefficient of w M((1-κ)/3, 4/3, -s)
    k_neg: float  # F = k_neg x^{deg3} U(-κ/3, 2/3, τ) for v < 0
    k_pos: Optional[float]  # F = k_pos x^{deg3} e^{-s} U(a_pos, 2/3, s) for v > 0, if any
    a_pos: Optional[float]


@lru_cache(maxsize=None)
def _phi_family(m: int) -> _Family:
    idx = PhiIndex(m)
    lam = idx.lam
    return _Family(
        deg3=lam,
        A=idx.c * gamma(1 / 3) * rgamma(1 / 3 - lam),
        B=-idx.c * gamma(-1 / 3) * rgamma(-lam),
        k_neg=idx.c,
        k_pos=idx.c * idx.M,
        a_pos=idx.a,
    )


@lru_cache(maxsize=None)
def _psi_family(l: int) -> _Family:
    idx = PsiIndex(l)
    return _Family(
        deg3=idx.kappa / 3.0, A=1.0, B=idx.C, k_neg=idx.u_factor, k_pos=None, a_pos=None
    )


@lru_cache(maxsize=None)
def _series_coefficients(fam: _Family) -> np.ndarray:
    """Taylor coefficients g_n of G(w) = A M(α,2/3,-w³) + B w M(α+1/3,4/3,-w³)."""
    alpha = -fam.deg3
    g = np.zeros(3 * _SERIES_TERMS)
    t1, t2 = fam.A, fam.B
    for k in range(_SERIES_TERMS):
        g[3 * k] = t1
        g[3 * k + 1] = t2
        t1 *= -(alpha + k) / ((2 / 3 + k) * (k + 1))
        t2 *= -(alpha + 1 / 3 + k) / ((4 / 3 + k) * (k + 1))
    return g


def _series_derivative(fam: _Family, w: np.ndarray, j: int) -> np.ndarray:
    g = _series_coefficients(fam)
    n = np.arange(g.size)
    fall = np.ones(g.size)
    for i in range(j):
        fall = fall * (n - i)
    coef = (g * fall)[j:]
    out = np.zeros_like(w)
    for c in coef[::-1]:  # Horner
        out = out * w + c
    return out


def _h_negative(fam: _Family, s: np.ndarray, j: int) -> np.ndarray:
    """j-th s-derivative of k_neg U(α, 2/3, -s), s < 0."""
    alpha = -fam.deg3
    return fam.k_neg * pochhammer(alpha, j) * tricomi_u(alpha + j, 2 / 3 + j, -s)


def _h_positive(fam: _Family, s: np.ndarray, j: int) -> np.ndarray:
    """j-th s-derivative of the v > 0 profile, s > 0."""
    if fam.k_pos is not None:
        return fam.k_pos * (-1.0) ** j * tricomi_u_scaled(fam.a_pos, 2 / 3 + j, s)
    alpha = -fam.deg3
    alpha2 = alpha + 1 / 3
    first = fam.A * (-1.0) ** j * pochhammer(alpha, j) / pochhammer(2 / 3, j)
    first = first * kummer_m(alpha + j, 2 / 3 + j, -s)
    second = fam.B * pochhammer(4 / 3 - j, j) * s ** (1 / 3 - j)
    second = second * kummer_m(alpha2, 4 / 3 - j, -s)
    return first + second


# Faà di Bruno for s(v) = v³/9x: s' = v²/3x, s'' = 2v/3x, s''' = 2/3x
def _fdb_terms(k: int) -> list[tuple[float, int, int, int]]:
    terms = []
    for m3 in range(k // 3 + 1):
        for m2 in range((k - 3 * m3) // 2 + 1):
            m1 = k - 3 * m3 - 2 * m2
            coef = math.factorial(k) / (
                math.factorial(m1) * math.factorial(m2) * math.factorial(m3) * 2**m2 * 6**m3
            )
            terms.append((coef, m1, m2, m3))
    return terms


def _branch_dv(fam, x, v, k, hfun) -> np.ndarray:
    s = v**3 / (9.0 * x)
    d1, d2, d3 = v**2 / (3.0 * x), 2.0 * v / (3.0 * x), 2.0 / (3.0 * x)
    cache: dict[int, np.ndarray] = {}
    total = np.zeros_like(v)
    for coef, m1, m2, m3 in _fdb_terms(k):
        j = m1 + m2 + m3
        if j not in cache:
            cache[j] = hfun(fam, s, j)
        total = total + coef * cache[j] * d1**m1 * d2**m2 * d3**m3
    return x**fam.deg3 * total


def _branch_dx(fam, x, v, hfun) -> np.ndarray:
    s = v**3 / (9.0 * x)
    return x ** (fam.deg3 - 1.0) * (fam.deg3 * hfun(fam, s, 0) - s * hfun(fam, s, 1))


def _series_dv(fam, x, v, k) -> np.ndarray:
    q = (9.0 * x) ** (-1.0 / 3.0)
    return x**fam.deg3 * q**k * _series_derivative(fam, v * q, k)


def _series_dx(fam, x, v) -> np.ndarray:
    w = v * (9.0 * x) ** (-1.0 / 3.0)
    g0 = _series_derivative(fam, w, 0)
    g1 = _series_derivative(fam, w, 1)
    return x ** (fam.deg3 - 1.0) * (fam.deg3 * g0 - w * g1 / 3.0)


_BRANCHES = ("series", "negative", "positive")


def _route(x: np.ndarray, v: np.ndarray, branch: Optional[str]) -> dict[str, np.ndarray]:
    if branch is not None:
        if branch not in _BRANCHES:
            raise ValueError(f"unknown branch {branch!r}")
        return {b: np.full(x.shape, b == branch) for b in _BRANCHES}
    s = v**3 / (9.0 * x)
    return {
        "series": np.abs(s) <= NEAR_ZERO_S,
        "negative": s < -NEAR_ZERO_S,
        "positive": s > NEAR_ZERO_S,
    }


def _broadcast(x: ArrayLike, v: ArrayLike) -> tuple[np.ndarray, np.ndarray, bool, tuple]:
    xa, va = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(v, dtype=float))
    scalar = xa.ndim == 0
    shape = xa.shape
    return xa.ravel().astype(float), va.ravel().astype(float), scalar, shape


def _pack(out: np.ndarray, scalar: bool, shape: tuple) -> ArrayLike:
    return float(out[0]) if scalar else out.reshape(shape)


def _family_dv(fam: _Family, x: np.ndarray, v: np.ndarray, k: int, branch) -> np.ndarray:
    out = np.empty_like(x)
    routes = _route(x, v, branch)
    if np.any(routes["series"]):
        sel = routes["series"]
        out[sel] = _series_dv(fam, x[sel], v[sel], k)
    if np.any(routes["negative"]):
        sel = routes["negative"]
        out[sel] = _branch_dv(fam, x[sel], v[sel], k, _h_negative)
    if np.any(routes["positive"]):
        sel = routes["positive"]
        out[sel] = _branch_dv(fam, x[sel], v[sel], k, _h_positive)
    return out


def _family_dx(fam: _Family, x: np.ndarray, v: np.ndarray, branch) -> np.ndarray:
    out = np.empty_like(x)
    routes = _route(x, v, branch)
    if np.any(routes["series"]):
        sel = routes["series"]
        out[sel] = _series_dx(fam, x[sel], v[sel])
    if np.any(routes["negative"]):
        sel = routes["negative"]
        out[sel] = _branch_dx(fam, x[sel], v[sel], _h_negative)
    if np.any(routes["positive"]):
        sel = routes["positive"]
        out[sel] = _branch_dx(fam, x[sel], v[sel], _h_positive)
    return out


def _require_positive_x(x: np.ndarray, name: str) -> None:
    if np.any(np.isnan(x)) or np.any(x <= 0):
        raise DomainError(f"{name}: requires x > 0")


def _check_order(order: int, name: str) -> int:
    if int(order) != order or not 0 <= order <= MAX_V_ORDER:
        raise DomainError(f"{name}: order must be an integer in 0..{MAX_V_ORDER}")
    return int(order)


# ---------------------------------------------------------------------- φ_m


def phi(m: Union[int, PhiIndex], x: ArrayLike, v: ArrayLike, *, branch: Optional[str] = None) -> ArrayLike:
    """φ_m(x, v).

    On x = 0 the trace is returned: 0 for v > 0, and c_m 9^{-λ} |v|^{3λ}
    for v < 0 when m >= 0.  ``branch`` forces one representation
    ("series", "negative" or "positive") and is meant for diagnostics.
    """
    idx = _phi_index(m)
    fam = _phi_family(idx.m)
    xa, va, scalar, shape = _broadcast(x, v)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("phi: requires x >= 0")
    out = np.empty_like(xa)
    wall = xa == 0
    if np.any(wall):
        vw = va[wall]
        if idx.m == -1 and np.any(vw <= 0):
            raise DomainError("phi: phi_{-1} is singular on {x = 0, v <= 0}")
        out[wall] = np.where(vw > 0, 0.0, idx.c * 9.0 ** (-idx.lam) * np.abs(vw) ** (3 * idx.lam))
    inner = ~wall
    if np.any(inner):
        out[inner] = _family_dv(fam, xa[inner], va[inner], 0, branch)
    return _pack(out, scalar, shape)


def phi_dv(m: Union[int, PhiIndex], x: ArrayLike, v: ArrayLike, order: int = 1, *, branch: Optional[str] = None) -> ArrayLike:
    """∂_v^order φ_m from analytic parameter shifts (order up to 4)."""
    idx = _phi_index(m)
    order = _check_order(order, "phi_dv")
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "phi_dv")
    return _pack(_family_dv(_phi_family(idx.m), xa, va, order, branch), scalar, shape)


def phi_dx(m: Union[int, PhiIndex], x: ArrayLike, v: ArrayLike, *, branch: Optional[str] = None) -> ArrayLike:
    """∂_x φ_m.

    For m >= 0 this is the recursion (c_{m-1}/c_m)(1/36 - m²) φ_{m-1}.
    For m = -1 the chain rule x^{λ-1}[λH - sH'] is applied to the profile
    H(s), with H' from the shift U' = -aU(a+1, b+1).
    """
    idx = _phi_index(m)
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "phi_dx")
    if idx.m >= 0:
        prev = PhiIndex(idx.m - 1)
        factor = prev.c / idx.c * (1.0 / 36.0 - idx.m**2)
        out = factor * _family_dv(_phi_family(prev.m), xa, va, 0, branch)
    else:
        out = _family_dx(_phi_family(idx.m), xa, va, branch)
    return _pack(out, scalar, shape)


def phi_dx_chain(m: Union[int, PhiIndex], x: ArrayLike, v: ArrayLike, *, branch: Optional[str] = None) -> ArrayLike:
    """∂_x φ_m from the chain rule alone (independent of the recursion)."""
    idx = _phi_index(m)
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "phi_dx_chain")
    return _pack(_family_dx(_phi_family(idx.m), xa, va, branch), scalar, shape)


# ---------------------------------------------------------------------- ψ_l


def psi(l: Union[int, PsiIndex], x: ArrayLike, v: ArrayLike, *, branch: Optional[str] = None) -> ArrayLike:
    """ψ_l(x, v); on x = 0 the trace c_λ v^κ (v > 0) or its v < 0 analogue."""
    idx = _psi_index(l)
    fam = _psi_family(idx.l)
    xa, va, scalar, shape = _broadcast(x, v)
    if np.any(np.isnan(xa)) or np.any(xa < 0):
        raise DomainError("psi: requires x >= 0")
    out = np.empty_like(xa)
    wall = xa == 0
    if np.any(wall):
        vw = va[wall]
        k = idx.kappa
        out[wall] = np.where(
            vw >= 0,
            idx.c_lambda * np.abs(vw) ** k,
            idx.u_factor * 9.0 ** (-k / 3) * np.abs(vw) ** k,
        )
    inner = ~wall
    if np.any(inner):
        out[inner] = _family_dv(fam, xa[inner], va[inner], 0, branch)
    return _pack(out, scalar, shape)


def psi_dv(l: Union[int, PsiIndex], x: ArrayLike, v: ArrayLike, order: int = 1, *, branch: Optional[str] = None) -> ArrayLike:
    """∂_v^order ψ_l (order up to 4)."""
    idx = _psi_index(l)
    order = _check_order(order, "psi_dv")
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "psi_dv")
    return _pack(_family_dv(_psi_family(idx.l), xa, va, order, branch), scalar, shape)


def psi_dx(l: Union[int, PsiIndex], x: ArrayLike, v: ArrayLike, *, branch: Optional[str] = None) -> ArrayLike:
    """∂_x ψ_l = ((3l+2)/3) ψ_{l-1} for l >= 1."""
    idx = _psi_index(l)
    if idx.l == 0:
        raise FamilyIndexError("psi_dx: l = 0 has no lower member; use psi_dx_chain or v ∂_x ψ_0 = ∂_vv ψ_0")
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "psi_dx")
    out = idx.kappa / 3.0 * _family_dv(_psi_family(idx.l - 1), xa, va, 0, branch)
    return _pack(out, scalar, shape)


def psi_dx_chain(l: Union[int, PsiIndex], x: ArrayLike, v: ArrayLike, *, branch: Optional[str] = None) -> ArrayLike:
    """∂_x ψ_l from the chain rule alone; valid for every l >= 0."""
    idx = _psi_index(l)
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "psi_dx_chain")
    return _pack(_family_dx(_psi_family(idx.l), xa, va, branch), scalar, shape)


def psi0_forced(x: ArrayLike, v: ArrayLike) -> ArrayLike:
    """Solution of v ∂_x f - ∂_vv f = 1 vanishing on {x = 0, v > 0}.

    Equal to (ψ_0 - c_λ v²)/(2 c_λ); homogeneous of degree two.
    """
    c = PsiIndex(0).c_lambda
    return (psi(0, x, v) - c * np.asarray(v, dtype=float) ** 2) / (2.0 * c)


def psi0_forced_derivatives(x: ArrayLike, v: ArrayLike) -> tuple[ArrayLike, ArrayLike]:
    """(∂_x, ∂_vv) of ``psi0_forced``."""
    c = PsiIndex(0).c_lambda
    dx = psi_dx_chain(0, x, v) / (2.0 * c)
    dvv = (psi_dv(0, x, v, 2) - 2.0 * c) / (2.0 * c)
    return dx, dvv


# -------------------------------------------------------------------- basis


def basis_Phi(k: int, x: ArrayLike, v: ArrayLike) -> ArrayLike:
    """Expansion building blocks.

    Φ_0..Φ_2 = v^i ∂_v^i φ_0, Φ_3, Φ_4 = v^j ∂_v^j ψ_0, Φ_5 = ∂_v φ_1.
    """
    if k not in range(6):
        raise FamilyIndexError(f"basis_Phi: k must be in 0..5, got {k}")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0):
        raise DomainError("basis_Phi: requires x > 0")
    va = np.asarray(v, dtype=float)
    if k == 0:
        return phi(0, x, v)
    if k in (1, 2):
        return va**k * phi_dv(0, x, v, k)
    if k == 3:
        return psi(0, x, v)
    if k == 4:
        return va * psi_dv(0, x, v, 1)
    return phi_dv(1, x, v, 1)


# ---------------------------------------------------------- regions, bounds


@dataclass(frozen=True)
class Region:
    """One of RMinus(ε), RZero, RPlus."""

    tag: str
    eps: Optional[float] = None

    def __str__(self) -> str:
        if self.tag == "RMinus":
            return "RMinus" if self.eps in (None, 1.0) else f"RMinus({self.eps:g})"
        return self.tag


R_ZERO = Region("RZero")
R_PLUS = Region("RPlus")


def RMinus(eps: float = 1.0) -> Region:
    return Region("RMinus", float(eps))


def region_classify(x: float, v: float, eps: float = 1.0) -> Region:
    """Which of the three characteristic regions contains (x, v).

    R^0 = {x >= |v|³} (ties included), R^+ = {x < -v³}, and the rest of
    v > 0 is R^-.  With ε < 1, points of R^- satisfying x^ε <= v³ are
    tagged RMinus(ε); the remaining ones keep RMinus(1).
    """
    x, v = float(x), float(v)
    if not x > 0:
        raise DomainError("region_classify: requires x > 0")
    if not 0 < eps <= 1:
        raise DomainError("region_classify: eps must lie in (0, 1]")
    if x >= abs(v) ** 3:
        return R_ZERO
    if v < 0:
        return R_PLUS
    if x**eps <= v**3:
        return RMinus(eps)
    return RMinus(1.0)


def _region_codes(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    """-1 for R^-, 0 for R^0, +1 for R^+ (vectorized, ε = 1)."""
    codes = np.zeros(x.shape, dtype=int)
    bulk = x >= np.abs(v) ** 3
    codes[~bulk & (v > 0)] = -1
    codes[~bulk & (v < 0)] = 1
    return codes


@dataclass(frozen=True)
class EnvelopeValue:
    value: float
    region: Region
    log_value: float


def _log_envelope(idx: PhiIndex, x: float, v: float, code: int) -> float:
    if code == -1:
        s = v**3 / (9.0 * x)
        return idx.lam * math.log(x) - idx.a * math.log(v**3 / x) - s
    if code == 0:
        return idx.lam * math.log(x)
    return 3.0 * idx.lam * math.log(abs(v))


def envelope(m: Union[int, PhiIndex], x: float, v: float) -> EnvelopeValue:
    """Two-sided bound profile of |φ_m| in the region containing (x, v).

    R^-: x^λ (v³/x)^{-(5/6+m)} e^{-v³/9x};  R^0: x^λ;  R^+: |v|^{3λ}.
    For m >= 1 only R^- and R^0 ∩ {v >= 0} are covered.
    """
    idx = _phi_index(m)
    x, v = float(x), float(v)
    region = region_classify(x, v)
    code = {"RMinus": -1, "RZero": 0, "RPlus": 1}[region.tag]
    if idx.m >= 1 and (code == 1 or (code == 0 and v < 0)):
        raise RegionError("envelope: no bound for m >= 1 on {v < 0}")
    logv = _log_envelope(idx, x, v, code)
    return EnvelopeValue(math.exp(logv), region, logv)


def envelope_ratio(m: Union[int, PhiIndex], x: ArrayLike, v: ArrayLike) -> ArrayLike:
    """φ_m / envelope, computed without under- or overflow in R^-."""
    idx = _phi_index(m)
    xa, va, scalar, shape = _broadcast(x, v)
    _require_positive_x(xa, "envelope_ratio")
    codes = _region_codes(xa, va)
    if idx.m >= 1 and np.any((codes == 1) | ((codes == 0) & (va < 0))):
        raise RegionError("envelope_ratio: no bound for m >= 1 on {v < 0}")
    out = np.empty_like(xa)
    minus = codes == -1
    if np.any(minus):
        s = va[minus] ** 3 / (9.0 * xa[minus])
        out[minus] = idx.c * idx.M * tricomi_u(idx.a, 2 / 3, s) * (9.0 * s) ** idx.a
    zero = codes == 0
    if np.any(zero):
        out[zero] = phi(idx, xa[zero], va[zero]) / xa[zero] ** idx.lam
    plus = codes == 1
    if np.any(plus):
        out[plus] = phi(idx, xa[plus], va[plus]) / np.abs(va[plus]) ** (3 * idx.lam)
    return _pack(out, scalar, shape)


# ------------------------------------------------------------ family lookup


def family_function(family: str, index: int = 0) -> Callable[[ArrayLike, ArrayLike], ArrayLike]:
    """Evaluator (x, v) -> value for a named family.

    ``family`` is one of "phi", "psi", "psi0-forced", "Phi".
    """
    if family == "phi":
        idx = PhiIndex(index)
        return lambda x, v: phi(idx, x, v)
    if family == "psi":
        jdx = PsiIndex(index)
        return lambda x, v: psi(jdx, x, v)
    if family == "psi0-forced":
        return psi0_forced
    if family == "Phi":
        if index not in range(6):
            raise FamilyIndexError(f"basis index must be in 0..5, got {index}")
        return lambda x, v: basis_Phi(index, x, v)
    raise FamilyIndexError(f"unknown family {family!r}")


def family_degree(family: str, index: int = 0) -> float:
    """Homogeneity degree under (x, v) -> (r³x, rv)."""
    if family == "phi":
        return PhiIndex(index).degree
    if family == "psi":
        return float(PsiIndex(index).kappa)
    if family == "psi0-forced":
        return 2.0
    if family == "Phi":
        return {0: 0.5, 1: 0.5, 2: 0.5, 3: 2.0, 4: 2.0, 5: 2.5}[index]
    raise FamilyIndexError(f"unknown family {family!r}")
