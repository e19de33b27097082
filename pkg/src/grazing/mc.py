"""Monte Carlo for the kinetic Langevin process (integrated Brownian motion).

Two simulations share the exact Gaussian free flight:

* the reversed process dX = -V ds, dV = √2 dB, for which f(X_s, V_s) is a
  martingale whenever v ∂_x f - ∂_vv f = 0, so a solution with in-flow data g
  is h(x, v) = E[g(V_τ)] with τ the first exit from the domain;
* the forward process dX = V dt, dV = √2 dB, with diffuse re-emission or
  absorption at the wall x = 0.

The wall sits at x = 0 with inward normal +1, so particles leave the domain
with v < 0 and are re-emitted with v > 0.

Every path draws from its own counter-based stream (a splitmix64 hash of
seed, path id and draw counter), so results do not depend on thread count.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import os

# TBB in this toolchain is too old for numba and only produces a warning
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

import numba
import numpy as np
from numba import njit, prange
from scipy import integrate

from .errors import ConvergenceError, DomainError, ValidationError

SQRT2 = math.sqrt(2.0)
INV_2SQRT3 = 1.0 / (2.0 * math.sqrt(3.0))

# exit kinds
EXIT_WALL, EXIT_FAR, EXIT_TOP, EXIT_BOTTOM, EXIT_TIMEOUT = 0, 1, 2, 3, 4

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


# --------------------------------------------------------------------- RNG


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def _uniform(key, path, counter):
    h = _mix64(_mix64(key ^ (path * _GOLDEN)) + counter * _GOLDEN)
    return (float(h >> np.uint64(11)) + 0.5) * 1.1102230246251565e-16


@njit(inline="always")
def _normal_pair(key, path, counter):
    u1 = _uniform(key, path, counter)
    u2 = _uniform(key, path, counter + np.uint64(1))
    r = math.sqrt(-2.0 * math.log(u1))
    return r * math.cos(2.0 * math.pi * u2), r * math.sin(2.0 * math.pi * u2)


def stream_key(seed: int) -> np.uint64:
    if not 0 <= int(seed) < 2**64:
        raise ValidationError("seed must be an unsigned 64-bit integer")
    return np.uint64(_mix64(np.uint64(int(seed))))


@njit(cache=True)
def _uniform_block(key, path, start, n):
    out = np.empty(n)
    for i in range(n):
        out[i] = _uniform(key, np.uint64(path), np.uint64(start + i))
    return out


def counter_uniforms(seed: int, path: int, start: int, n: int) -> np.ndarray:
    """Draws start..start+n-1 of the stream of ``path`` (for inspection)."""
    return _uniform_block(stream_key(seed), int(path), int(start), int(n))


# ----------------------------------------------------------- configuration


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 10_000
    dt_base: float = 1e-3
    seed: int = 0
    # dt <= boundary_refinement · (distance to the wall)^{2/3}
    boundary_refinement: float = 0.1
    dt_min: float = 1e-12
    horizon: float = 1e3
    # fraction of paths allowed to reach the horizon before an error is raised
    max_unresolved: float = 0.0
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        if int(self.n_paths) < 1:
            raise ValidationError("n_paths must be >= 1")
        for name in ("dt_base", "boundary_refinement", "dt_min", "horizon"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not 0.0 <= self.max_unresolved <= 1.0:
            raise ValidationError("max_unresolved must lie in [0, 1]")
        stream_key(self.seed)


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: int
    dt_base: float = float("nan")
    unresolved_mass: float = 0.0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass(frozen=True)
class Box:
    """Truncation (0, X] × [-V, V]; ``far_field`` is data on the far pieces."""

    X: float = math.inf
    V: float = math.inf
    far_field: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self) -> None:
        if not (self.X > 0 and self.V > 0):
            raise ValidationError("box extents must be positive")


def _set_threads(cfg: McConfig) -> None:
    if cfg.threads is not None:
        numba.set_num_threads(max(1, min(int(cfg.threads), numba.config.NUMBA_NUM_THREADS)))


# ------------------------------------------------------------- free flight


def gaussian_step(x, v, dt: float, rng: np.random.Generator, direction: float = -1.0):
    """Exact step of dX = direction·V ds, dV = √2 dB over time dt.

    With ΔB = √dt ξ1 and I = ∫_0^dt B = dt^{3/2}(ξ1/2 + ξ2/(2√3)) the pair
    (ΔV, ΔX - direction·V dt) = (√2 ΔB, direction·√2 I) has covariance
    [[2dt, direction·dt²], [direction·dt², (2/3)dt³]].
    """
    if not dt > 0:
        raise DomainError("gaussian_step: dt must be positive")
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    shape = np.broadcast_shapes(x.shape, v.shape)
    xi1 = rng.standard_normal(shape)
    xi2 = rng.standard_normal(shape)
    sdt = math.sqrt(dt)
    dB = sdt * xi1
    I = dt * sdt * (0.5 * xi1 + INV_2SQRT3 * xi2)
    return x + direction * (v * dt + SQRT2 * I), v + SQRT2 * dB


def step_covariance(dt: float) -> np.ndarray:
    """Covariance of (ΔV, -(ΔX + V dt)) for the reversed process."""
    return np.array([[2.0 * dt, dt * dt], [dt * dt, 2.0 * dt**3 / 3.0]])


# -------------------------------------------------------- crossing helpers


@njit(inline="always")
def _hermite(x0, x1, d0, d1, s):
    # d0, d1 are derivatives in units of the step (dx/dθ)
    s2 = s * s
    s3 = s2 * s
    return (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * d0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * d1


@njit(cache=True)
def _first_crossing(x0, x1, d0, d1, level):
    """First θ in (0, 1] where the Hermite path reaches ``level`` from above; -1 if none."""
    hi = -1.0
    if x1 - level <= 0.0:
        hi = 1.0
    # interior dips can hide between the end points when the slope changes sign
    if d0 < 0.0 < d1 or hi > 0.0:
        for k in range(1, 9):
            s = k / 8.0
            if s >= hi and hi > 0.0:
                break
            if _hermite(x0, x1, d0, d1, s) - level <= 0.0:
                hi = s
                break
    if hi < 0.0:
        return -1.0
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if _hermite(x0, x1, d0, d1, mid) - level > 0.0:
            lo = mid
        else:
            hi = mid
    return hi


# ------------------------------------------------------- reversed process


@njit(parallel=True, cache=True)
def _exit_kernel(x0, v0, n, key, dt_base, kref, dt_min, horizon, X, V, kind, ex, ev):
    third2 = 2.0 / 3.0
    for p in prange(n):
        path = np.uint64(p)
        c = np.uint64(0)
        x = x0
        v = v0
        t = 0.0
        kind[p] = EXIT_TIMEOUT
        ex[p] = x
        ev[p] = v
        while t < horizon:
            dt = dt_base
            lim = kref * x**third2
            if lim < dt:
                dt = lim
            if X < np.inf:
                lim = kref * (X - x) ** third2
                if lim < dt:
                    dt = lim
            if dt < dt_min:
                dt = dt_min
            if t + dt > horizon:
                dt = horizon - t
            z1, z2 = _normal_pair(key, path, c)
            u = _uniform(key, path, c + np.uint64(2))
            c += np.uint64(3)
            sdt = math.sqrt(dt)
            v1 = v + SQRT2 * sdt * z1
            x1 = x - v * dt - SQRT2 * dt * sdt * (0.5 * z1 + INV_2SQRT3 * z2)

            # x-walls: Hermite interpolation with dx/dθ = -v dt
            th_w = _first_crossing(x, x1, -v * dt, -v1 * dt, 0.0)
            th_f = -1.0
            if X < np.inf:
                th_f = _first_crossing(-x, -x1, v * dt, v1 * dt, -X)
            # velocity walls: linear when an end point is outside, bridge otherwise
            th_v = -1.0
            top = True
            if V < np.inf:
                if v1 >= V:
                    th_v = (V - v) / (v1 - v)
                elif v1 <= -V:
                    th_v = (-V - v) / (v1 - v)
                    top = False
                else:
                    p_top = math.exp(-(V - v) * (V - v1) / dt)
                    p_bot = math.exp(-(V + v) * (V + v1) / dt)
                    if u < p_top:
                        th_v = 0.5
                    elif u < p_top + p_bot:
                        th_v = 0.5
                        top = False

            best = 2.0
            which = -1
            if th_w >= 0.0 and th_w < best:
                best = th_w
                which = EXIT_WALL
            if th_f >= 0.0 and th_f < best:
                best = th_f
                which = EXIT_FAR
            if th_v >= 0.0 and th_v < best:
                best = th_v
                which = EXIT_TOP if top else EXIT_BOTTOM
            if which >= 0:
                kind[p] = which
                xe = _hermite(x, x1, -v * dt, -v1 * dt, best)
                ve = v + best * (v1 - v)
                if which == EXIT_WALL:
                    xe = 0.0
                    if ve < 0.0:
                        ve = 0.0
                elif which == EXIT_FAR:
                    xe = X
                    if ve > 0.0:
                        ve = 0.0
                elif which == EXIT_TOP:
                    ve = V
                else:
                    ve = -V
                if xe < 0.0:
                    xe = 0.0
                if xe > X:
                    xe = X
                ex[p] = xe
                ev[p] = ve
                break
            x = x1
            v = v1
            t += dt
            ex[p] = x
            ev[p] = v


@dataclass
class ExitSample:
    kind: np.ndarray
    x: np.ndarray
    v: np.ndarray


def simulate_exits(x: float, v: float, cfg: McConfig, box: Box = Box()) -> ExitSample:
    """Exit kinds and positions of cfg.n_paths reversed paths from (x, v)."""
    if not x > 0:
        raise DomainError("start point needs x > 0")
    if not x < box.X or not abs(v) < box.V:
        raise DomainError("start point outside the box")
    _set_threads(cfg)
    n = int(cfg.n_paths)
    kind = np.empty(n, dtype=np.int64)
    ex = np.empty(n)
    ev = np.empty(n)
    _exit_kernel(
        float(x), float(v), n, stream_key(cfg.seed), float(cfg.dt_base), float(cfg.boundary_refinement),
        float(cfg.dt_min), float(cfg.horizon), float(box.X), float(box.V), kind, ex, ev,
    )
    return ExitSample(kind, ex, ev)


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    n = values.size
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1)) if n > 1 else 0.0
    return mean, std / math.sqrt(n)


def estimate_inflow_solution(
    x: float,
    v: float,
    g: Callable[[np.ndarray], np.ndarray],
    cfg: McConfig,
    box: Box = Box(),
) -> McEstimate:
    """E[data at the exit point] for the reversed process started at (x, v).

    ``g`` is the in-flow datum on {x = 0, v > 0}; the far pieces of a box use
    ``box.far_field`` (zero when omitted).  Paths that reach the horizon count
    as zero and their fraction is reported; above cfg.max_unresolved it is an
    error.
    """
    s = simulate_exits(x, v, cfg, box)
    vals = np.zeros(s.kind.size)
    wall = s.kind == EXIT_WALL
    vals[wall] = np.asarray(g(s.v[wall]), dtype=float)
    far = (s.kind != EXIT_WALL) & (s.kind != EXIT_TIMEOUT)
    if np.any(far) and box.far_field is not None:
        vals[far] = np.asarray(box.far_field(s.x[far], s.v[far]), dtype=float)
    unresolved = float(np.mean(s.kind == EXIT_TIMEOUT))
    if unresolved > cfg.max_unresolved:
        raise ConvergenceError(
            f"{unresolved:.4g} of the probability mass did not exit before the horizon {cfg.horizon:g}"
        )
    if not np.all(np.isfinite(vals)):
        raise ValidationError("boundary data returned non-finite values")
    mean, se = _mean_stderr(vals)
    return McEstimate(mean, se, int(cfg.n_paths), int(cfg.seed), float(cfg.dt_base), unresolved)


# ----------------------------------------------------- diffuse re-emission


@dataclass(frozen=True)
class WallSampler:
    """Inverse CDF of the re-emission density w·M(w) on w > 0.

    The table is kept in y = w², where dC/dy = M(w)/2 is smooth at the wall,
    and inverted by cubic Hermite interpolation.
    """

    w: np.ndarray
    cdf: np.ndarray
    slope: np.ndarray  # dy/dC at the nodes

    def inverse_cdf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise DomainError("inverse_cdf: u outside [0, 1]")
        return _inv_cdf_vec(u.ravel(), self.w, self.cdf, self.slope).reshape(u.shape)

    def cdf_at(self, w) -> np.ndarray:
        return np.interp(np.asarray(w, dtype=float), self.w, self.cdf, left=0.0, right=1.0)

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        return self.inverse_cdf(rng.random(size))


@njit(cache=True)
def _inv_cdf_scalar(u, w, cdf, slope):
    n = cdf.size
    if u <= cdf[0]:
        return w[0]
    if u >= cdf[n - 1]:
        return w[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf[mid] <= u:
            lo = mid
        else:
            hi = mid
    h = cdf[hi] - cdf[lo]
    s = (u - cdf[lo]) / h
    y0 = w[lo] * w[lo]
    y1 = w[hi] * w[hi]
    y = _hermite(y0, y1, slope[lo] * h, slope[hi] * h, s)
    if y < y0:
        y = y0
    if y > y1:
        y = y1
    return math.sqrt(y)


@njit(cache=True)
def _inv_cdf_vec(u, w, cdf, slope):
    out = np.empty(u.size)
    for i in range(u.size):
        out[i] = _inv_cdf_scalar(u[i], w, cdf, slope)
    return out


def flux_normalization(M: Callable[[np.ndarray], np.ndarray]) -> float:
    """∫_0^∞ M(w) w dw (the re-emitted side)."""
    val, _ = integrate.quad(lambda w: float(M(np.array(w))) * w, 0.0, np.inf, epsabs=1e-14, epsrel=1e-12)
    return val


def build_wall_sampler(M: Callable[[np.ndarray], np.ndarray], nodes: int = 4096) -> WallSampler:
    norm = flux_normalization(M)
    if abs(norm - 1.0) > 1e-6:
        raise ValidationError(f"wall density not normalized: ∫ M(w) w dw = {norm:.10g}")
    w_max = 1.0
    while integrate.quad(lambda w: float(M(np.array(w))) * w, w_max, np.inf)[0] > 1e-16:
        w_max *= 1.25
        if w_max > 1e4:
            raise ValidationError("wall density tail too heavy to tabulate")
    w = np.linspace(0.0, w_max, nodes + 1)
    # 8-point Gauss-Legendre on every cell for the CDF increments
    gx, gw = np.polynomial.legendre.leggauss(8)
    a, b = w[:-1, None], w[1:, None]
    pts = 0.5 * (b - a) * gx[None, :] + 0.5 * (a + b)
    inc = 0.5 * (b - a)[:, 0] * np.sum(gw[None, :] * pts * np.asarray(M(pts), dtype=float), axis=1)
    cdf = np.concatenate(([0.0], np.cumsum(inc)))
    cdf /= cdf[-1]
    Mw = np.asarray(M(w), dtype=float)
    if np.any(Mw < 0):
        raise ValidationError("wall density must be nonnegative")
    with np.errstate(divide="ignore"):
        slope = np.where(Mw > 0, 2.0 / np.maximum(Mw, 1e-300) / norm, 0.0)
    # strictly increasing table for the search
    keep = np.concatenate(([True], np.diff(cdf) > 0))
    return WallSampler(w[keep], cdf[keep], slope[keep])


@lru_cache(maxsize=16)
def _cached_sampler(M) -> WallSampler:
    return build_wall_sampler(M)


def sample_diffuse_velocity(M: Callable[[np.ndarray], np.ndarray], rng: np.random.Generator, size=None):
    """Re-emission speeds with density w·M(w) on w > 0."""
    sampler = _cached_sampler(M)
    out = sampler.sample(rng, size)
    return float(out) if size is None else out


# ------------------------------------------------------ forward particles


@njit(parallel=True, cache=True)
def _forward_kernel(n, key, x_init, dt_base, kref, dt_min, T, absorbing, tw, tc, ts,
                    xf, vf, alive, n_emit, hit_v, hit_t, max_hits):
    third2 = 2.0 / 3.0
    for p in prange(n):
        path = np.uint64(p)
        c = np.uint64(0)
        # initial state: x = x_init, v ~ N(0, 1/2) (density ∝ e^{-v²})
        z1, z2 = _normal_pair(key, path, c)
        c += np.uint64(2)
        x = x_init
        v = z1 / SQRT2
        t = 0.0
        alive[p] = True
        n_emit[p] = 0
        hits = 0
        while t < T:
            dt = dt_base
            lim = kref * x**third2
            if lim < dt:
                dt = lim
            if dt < dt_min:
                dt = dt_min
            if t + dt > T:
                dt = T - t
            z1, z2 = _normal_pair(key, path, c)
            c += np.uint64(2)
            sdt = math.sqrt(dt)
            v1 = v + SQRT2 * sdt * z1
            x1 = x + v * dt + SQRT2 * dt * sdt * (0.5 * z1 + INV_2SQRT3 * z2)
            th = _first_crossing(x, x1, v * dt, v1 * dt, 0.0)
            if th < 0.0:
                x = x1
                v = v1
                t += dt
                continue
            vh = v + th * (v1 - v)
            if vh > 0.0:
                vh = 0.0
            if hits < max_hits:
                hit_v[p, hits] = vh
                hit_t[p, hits] = t + th * dt
            hits += 1
            if absorbing:
                alive[p] = False
                break
            u = _uniform(key, path, c)
            c += np.uint64(1)
            n_emit[p] += 1
            x = 0.0
            v = _inv_cdf_scalar(u, tw, tc, ts)
            t += th * dt
        xf[p] = x
        vf[p] = v


@dataclass
class ForwardResult:
    x_edges: np.ndarray
    v_edges: np.ndarray
    count: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    n_paths: int
    n_alive: int
    n_absorbed: int
    n_reemitted: int
    hit_velocities: np.ndarray
    hit_times: np.ndarray
    horizon: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, header=()) -> str:
        lines = [f"# {h}" for h in header]
        lines.append("x_bin,v_bin,count,density,stderr")
        xc = 0.5 * (self.x_edges[:-1] + self.x_edges[1:])
        vc = 0.5 * (self.v_edges[:-1] + self.v_edges[1:])
        for i, xv in enumerate(xc):
            for j, vv in enumerate(vc):
                lines.append(
                    f"{float(xv)!r},{float(vv)!r},{int(self.count[i, j])},{float(self.density[i, j])!r},{float(self.stderr[i, j])!r}"
                )
        return "\n".join(lines) + "\n"


def simulate_forward_diffuse(
    M: Optional[Callable[[np.ndarray], np.ndarray]],
    T: float,
    cfg: McConfig,
    *,
    x_init: float = 1.0,
    absorbing: bool = False,
    x_edges: Optional[np.ndarray] = None,
    v_edges: Optional[np.ndarray] = None,
    max_hits: int = 64,
) -> ForwardResult:
    """Forward particles on x > 0 started at x_init with v ~ e^{-v²}/√π.

    At the wall an outgoing particle is re-emitted with a speed drawn from
    w·M(w), or removed when ``absorbing``.  The phase-space histogram is taken
    at time T; bins carry Poisson error bars.
    """
    if not T > 0:
        raise ValidationError("horizon T must be positive")
    if not x_init > 0:
        raise ValidationError("x_init must be positive")
    if absorbing:
        table = WallSampler(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    else:
        if M is None:
            raise ValidationError("a wall density is required for diffuse re-emission")
        table = _cached_sampler(M)
    _set_threads(cfg)
    n = int(cfg.n_paths)
    xf = np.empty(n)
    vf = np.empty(n)
    alive = np.empty(n, dtype=np.bool_)
    n_emit = np.empty(n, dtype=np.int64)
    hit_v = np.full((n, max_hits), np.nan)
    hit_t = np.full((n, max_hits), np.nan)
    _forward_kernel(
        n, stream_key(cfg.seed), float(x_init), float(cfg.dt_base), float(cfg.boundary_refinement),
        float(cfg.dt_min), float(T), bool(absorbing), table.w, table.cdf, table.slope,
        xf, vf, alive, n_emit, hit_v, hit_t, int(max_hits),
    )
    if x_edges is None:
        x_edges = np.linspace(0.0, 2.0 * x_init, 21)
    if v_edges is None:
        v_edges = np.linspace(-3.0, 3.0, 25)
    count, _, _ = np.histogram2d(xf[alive], vf[alive], bins=[x_edges, v_edges])
    area = np.outer(np.diff(x_edges), np.diff(v_edges))
    density = count / (n * area)
    stderr = np.sqrt(count) / (n * area)
    hv = hit_v[~np.isnan(hit_v)]
    ht = hit_t[~np.isnan(hit_t)]
    return ForwardResult(
        np.asarray(x_edges, dtype=float), np.asarray(v_edges, dtype=float), count, density, stderr,
        n, int(alive.sum()), int((~alive).sum()), int(n_emit.sum()), hv, ht, float(T),
        {"hits_recorded_fraction": float(hv.size / max(1, int(n_emit.sum()) + int((~alive).sum())))},
    )


@dataclass(frozen=True)
class WallProfile:
    v_centers: np.ndarray
    density: np.ndarray
    stderr: np.ndarray
    slope: float
    slope_stderr: float


def wall_density_profile(result: ForwardResult, v_lo: float, v_hi: float, nbins: int = 12) -> WallProfile:
    """Time-integrated wall density f(0, v) for outgoing v, from hit velocities.

    A particle crossing with velocity v contributes flux |v| f(0, v), so the
    density is the hit histogram divided by |v|.  The slope is the weighted
    least squares fit of log f against log |v| (the kinetic distance to the
    grazing point on the wall) on logarithmic bins of |v| ∈ [v_lo, v_hi].
    """
    if not 0 < v_lo < v_hi:
        raise ValidationError("need 0 < v_lo < v_hi")
    speeds = -result.hit_velocities[result.hit_velocities < 0]
    edges = np.geomspace(v_lo, v_hi, nbins + 1)
    counts, _ = np.histogram(speeds, bins=edges)
    if np.any(counts < 10):
        raise ValidationError("too few wall hits in the profile bins")
    widths = np.diff(edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    dens = counts / (widths * centers * result.n_paths)
    err = dens / np.sqrt(counts)
    w = counts.astype(float)  # 1/var of log density
    A = np.column_stack([np.ones(nbins), np.log(centers)])
    Aw = A * np.sqrt(w)[:, None]
    bw = np.log(dens) * np.sqrt(w)
    coef, *_ = np.linalg.lstsq(Aw, bw, rcond=None)
    cov = np.linalg.inv(Aw.T @ Aw)
    return WallProfile(centers, dens, err, float(coef[1]), float(math.sqrt(cov[1, 1])))
