"""Gamma, Kummer M and Tricomi U for real parameters.

``kummer_m`` and ``tricomi_u`` accept a scalar or an array for the argument
``z`` while ``a`` and ``b`` stay scalar; that matches every use in the
solution families, where the parameters are fixed and the argument sweeps
over sample points.

U is evaluated from the connection formula

    U(a,b,z) = Γ(1-b)/Γ(a-b+1) M(a,b,z) + Γ(b-1)/Γ(a) z^{1-b} M(a-b+1,2-b,z)

unless the two terms cancel to more than six digits.  In that case the
Laplace integral

    U(a,b,z) = z^{-a}/Γ(a) ∫_0^∞ e^{-s} s^{a-1} (1+s/z)^{b-a-1} ds

is integrated with a double-exponential rule after shifting ``a`` into
``[1/2, 3/2)`` and recurring back down.
"""

from __future__ import annotations

import math
from typing import Union

import numpy as np

from .errors import ConvergenceError, DivergenceError, DomainError, PoleError

ArrayLike = Union[float, np.ndarray]

SERIES_CAP = 10_000
SERIES_RTOL = 1e-17
# the exponentially small half of the large-|z| expansion is dropped, which
# costs ~e^{-|z|}|z|^p relative accuracy; the cancellation-free series
# (direct for z > 0, after Kummer's transformation for z < 0) is used below
SERIES_LIMIT = 600.0
CANCELLATION_DIGITS = 6.0
DE_NODES = 512
DE_CHECK_NODES = 1024
LAPLACE_CHUNK = 2048
DE_CHECK_RTOL = 1e-10
CROSSCHECK_RTOL = 1e-8
ASYMPTOTIC_RTOL = 1e-6


def _is_nonpositive_integer(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def _as_array(z: ArrayLike) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype=float)
    return np.atleast_1d(arr).astype(float, copy=True), arr.ndim == 0


def _finish(out: np.ndarray, scalar: bool, shape: tuple) -> ArrayLike:
    if scalar:
        return float(out[0])
    return out.reshape(shape)


def gamma(x: float) -> float:
    """Γ(x) for real ``x``; raises ``PoleError`` at 0, -1, -2, ..."""
    x = float(x)
    if math.isnan(x):
        raise DomainError("gamma: argument is NaN")
    if _is_nonpositive_integer(x):
        raise PoleError(f"gamma: pole at x = {x:g}")
    try:
        return math.gamma(x)
    except OverflowError as exc:
        raise DomainError(f"gamma: overflow at x = {x:g}") from exc


def rgamma(x: float) -> float:
    """1/Γ(x), zero at the poles of Γ."""
    x = float(x)
    if _is_nonpositive_integer(x):
        return 0.0
    if x > 171.0:
        return 0.0
    return 1.0 / math.gamma(x)


def pochhammer(a: float, n: int) -> float:
    """Rising factorial (a)_n."""
    out = 1.0
    for k in range(n):
        out *= a + k
    return out


# ---------------------------------------------------------------- Kummer M


def _m_series(a: float, b: float, z: np.ndarray) -> np.ndarray:
    """Plain power series, stopped after three consecutive negligible terms."""
    total = np.ones_like(z)
    term = np.ones_like(z)
    quiet = np.zeros(z.shape, dtype=int)
    for k in range(SERIES_CAP):
        term = term * ((a + k) / ((b + k) * (k + 1.0))) * z
        total = total + term
        small = np.abs(term) <= SERIES_RTOL * np.abs(total)
        quiet = np.where(small, quiet + 1, 0)
        if np.all(quiet >= 3):
            return total
    raise ConvergenceError(f"kummer_m: series did not converge in {SERIES_CAP} terms")


def _asymptotic_sum(p: float, q: float, w: np.ndarray) -> np.ndarray:
    """Σ_s (p)_s (q)_s / s! w^s truncated at the smallest term.

    At least three correction terms are always included.
    """
    total = np.ones_like(w)
    term = np.ones_like(w)
    prev = np.full(w.shape, np.inf)
    done = np.zeros(w.shape, dtype=bool)
    err = np.zeros_like(w)
    for s in range(1, 400):
        term = term * (p + s - 1) * (q + s - 1) / s * w
        mag = np.abs(term)
        growing = (mag > prev) & (s > 3)
        newly = ~done & growing
        err = np.where(newly, mag, err)
        done |= newly
        total = np.where(done, total, total + term)
        tiny = ~done & (mag <= SERIES_RTOL * np.abs(total))
        done |= tiny
        prev = mag
        if np.all(done):
            break
    err = np.where(done, err, np.abs(term))
    if np.any(err > ASYMPTOTIC_RTOL * np.abs(total)):
        raise ConvergenceError("kummer_m: asymptotic expansion not accurate at this |z|")
    return total


def _kummer_array(a: float, b: float, z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    if _is_nonpositive_integer(a):
        out[:] = _m_series(a, b, z)
        return out

    pos_small = (z >= 0) & (z <= SERIES_LIMIT)
    pos_large = z > SERIES_LIMIT
    neg = z < 0
    if np.any(pos_small):
        out[pos_small] = _m_series(a, b, z[pos_small])
    if np.any(pos_large):
        zl = z[pos_large]
        lead = gamma(b) * rgamma(a)
        with np.errstate(over="ignore"):
            expo = np.exp(zl + (a - b) * np.log(zl))
        out[pos_large] = lead * expo * _asymptotic_sum(b - a, 1.0 - a, 1.0 / zl)
    if np.any(neg):
        y = -z[neg]
        # Kummer transformation keeps the series free of cancellation
        polynomial = _is_nonpositive_integer(b - a)
        near = y <= SERIES_LIMIT if not polynomial else np.ones(y.shape, dtype=bool)
        vals = np.empty_like(y)
        if np.any(near):
            vals[near] = np.exp(-y[near]) * _m_series(b - a, b, y[near])
        far = ~near
        if np.any(far):
            yf = y[far]
            lead = gamma(b) * rgamma(b - a)
            vals[far] = lead * yf ** (-a) * _asymptotic_sum(a, a - b + 1.0, 1.0 / yf)
        out[neg] = vals
    return out


def kummer_m(a: float, b: float, z: ArrayLike) -> ArrayLike:
    """Kummer's function M(a, b, z) = 1F1(a; b; z).

    Power series for |z| <= 600 (through Kummer's transformation when
    z < 0) and the large-|z| expansion beyond.
    """
    a, b = float(a), float(b)
    if _is_nonpositive_integer(b):
        raise PoleError(f"kummer_m: b = {b:g} is a nonpositive integer")
    arr, scalar = _as_array(z)
    if np.any(np.isnan(arr)):
        raise DomainError("kummer_m: argument is NaN")
    return _finish(_kummer_array(a, b, arr), scalar, np.shape(z))


# ---------------------------------------------------------------- Tricomi U


def _check_u_args(b: float, z: np.ndarray, name: str) -> None:
    if b == math.floor(b):
        raise PoleError(f"{name}: integer b = {b:g} is not supported")
    if np.any(np.isnan(z)) or np.any(z < 0):
        raise DomainError(f"{name}: requires z >= 0")


def _u_at_zero(a: float, b: float, name: str) -> float:
    if b >= 1:
        raise DivergenceError(f"{name}: U(a, b, 0) diverges for b = {b:g} >= 1")
    return gamma(1.0 - b) * rgamma(a - b + 1.0)


def _u_connection(a: float, b: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Connection-formula value and a mask of points free of cancellation."""
    c1 = gamma(1.0 - b) * rgamma(a - b + 1.0)
    c2 = gamma(b - 1.0) * rgamma(a)
    vals = np.full(z.shape, np.nan)
    ok = np.zeros(z.shape, dtype=bool)
    usable = z <= 700.0
    if not np.any(usable):
        return vals, ok
    zu = z[usable]
    with np.errstate(over="ignore", invalid="ignore"):
        t1 = c1 * _kummer_array(a, b, zu) if c1 != 0.0 else np.zeros_like(zu)
        if c2 != 0.0:
            t2 = c2 * zu ** (1.0 - b) * _kummer_array(a - b + 1.0, 2.0 - b, zu)
        else:
            t2 = np.zeros_like(zu)
        u = t1 + t2
        scale = np.maximum(np.abs(t1), np.abs(t2))
        good = np.isfinite(u) & np.isfinite(scale)
        good &= scale <= 10.0**CANCELLATION_DIGITS * np.abs(u)
    vals[usable] = u
    ok[usable] = good
    return vals, ok


def _de_grid(a: float, c: float, n: int) -> tuple[np.ndarray, float]:
    # s = exp((π/2) sinh t); s^a is below e^-60 at the left end and e^-s at the right
    t_lo = -math.asinh(2.0 / math.pi * 60.0 / a)
    s_max = 70.0 + 2.0 * (a + abs(c))
    t_hi = math.asinh(2.0 / math.pi * math.log(s_max))
    t = np.linspace(t_lo, t_hi, n)
    return t, t[1] - t[0]


def _laplace_log(a: float, b: float, z: np.ndarray, n: int) -> np.ndarray:
    """log of ∫_0^∞ e^{-s} s^{a-1} (1+s/z)^{b-a-1} ds for a > 0."""
    c = b - a - 1.0
    t, h = _de_grid(a, c, n)
    L = 0.5 * math.pi * np.sinh(t)
    s = np.exp(L)
    base = -s + a * L + np.log(0.5 * math.pi * np.cosh(t))
    out = np.empty(z.shape)
    for k in range(0, z.size, LAPLACE_CHUNK):
        zc = z[k : k + LAPLACE_CHUNK]
        logf = base[None, :] + c * np.log1p(s[None, :] / zc[:, None])
        top = logf.max(axis=1)
        w = np.exp(logf - top[:, None])
        total = w.sum(axis=1)
        edge = np.maximum(w[:, 0], w[:, -1])
        if np.any(edge > 1e-18 * total):
            raise ConvergenceError("tricomi_u: quadrature tail not negligible")
        out[k : k + LAPLACE_CHUNK] = top + np.log(h * total)
    return out


def _u_integral_positive(a: float, b: float, z: np.ndarray, scaled: bool) -> np.ndarray:
    """U (or e^{-z}U) from the Laplace integral, a > 0."""
    coarse = _laplace_log(a, b, z, DE_NODES)
    fine = _laplace_log(a, b, z, DE_CHECK_NODES)
    if np.any(np.abs(np.expm1(coarse - fine)) > DE_CHECK_RTOL):
        raise ConvergenceError("tricomi_u: quadrature refinement check failed")
    logu = fine - a * np.log(z) - math.lgamma(a)
    if scaled:
        logu = logu - z
    return np.exp(logu)


def _u_integral(a: float, b: float, z: np.ndarray, scaled: bool) -> np.ndarray:
    if a >= 0.5:
        return _u_integral_positive(a, b, z, scaled)
    # shift a up, then recur down:  U(c-1) = -c(c-b+1) U(c+1) - (b-2c-z) U(c)
    k = int(math.ceil(0.5 - a))
    top = a + k
    u_hi = _u_integral_positive(top + 1.0, b, z, scaled)
    u_c = _u_integral_positive(top, b, z, scaled)
    c = top
    for _ in range(k):
        u_lo = -c * (c - b + 1.0) * u_hi - (b - 2.0 * c - z) * u_c
        u_hi, u_c = u_c, u_lo
        c -= 1.0
    return u_c


def _tricomi(a: float, b: float, z: ArrayLike, scaled: bool, name: str) -> ArrayLike:
    a, b = float(a), float(b)
    arr, scalar = _as_array(z)
    _check_u_args(b, arr, name)
    out = np.empty_like(arr)

    zero = arr == 0.0
    if np.any(zero):
        out[zero] = _u_at_zero(a, b, name)
    pos = ~zero
    if np.any(pos):
        zp = arr[pos]
        vals, ok = _u_connection(a, b, zp)
        if scaled:
            vals = vals * np.exp(-zp)
        if a > 0:
            # independent check against the integral representation
            check = ok & (zp >= 1.0)
            if np.any(check):
                ref = _u_integral(a, b, zp[check], scaled)
                if np.any(np.abs(vals[check] - ref) > CROSSCHECK_RTOL * np.abs(ref)):
                    raise ConvergenceError(f"{name}: connection formula and quadrature disagree")
        bad = ~ok
        if np.any(bad):
            vals[bad] = _u_integral(a, b, zp[bad], scaled)
        out[pos] = vals
    return _finish(out, scalar, np.shape(z))


def tricomi_u(a: float, b: float, z: ArrayLike) -> ArrayLike:
    """Tricomi's function U(a, b, z) for z >= 0 and non-integer b."""
    return _tricomi(a, b, z, False, "tricomi_u")


def tricomi_u_scaled(a: float, b: float, z: ArrayLike) -> ArrayLike:
    """e^{-z} U(a, b, z), evaluated without forming e^{z} or U separately."""
    return _tricomi(a, b, z, True, "tricomi_u_scaled")
