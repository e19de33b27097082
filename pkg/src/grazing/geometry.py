"""Kinetic points, the Galilean group, scaling, distance and cylinders.

A point is z = (t, x, v) with x, v in R^n.  The group law is

    z0 ∘ z = (t0 + t, x0 + x + t v0, v0 + v),

the dilations are S_r z = (r²t, r³x, rv), and the distance is

    dist(z1, z2) = min_w max{|t1-t2|^{1/2}, |x1-x2-(t1-t2)w|^{1/3}, |v1-w|, |v2-w|}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.stats import qmc

from .errors import DomainError, ValidationError

Vector = Union[float, Sequence[float], np.ndarray]


def _vec(a: Vector) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(a, dtype=float)).copy()
    if arr.ndim != 1:
        raise ValidationError("kinetic point components must be scalars or 1-d vectors")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class KineticPoint:
    t: float
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", _vec(self.x))
        object.__setattr__(self, "v", _vec(self.v))
        if self.x.shape != self.v.shape:
            raise ValidationError("x and v must have the same dimension")

    @property
    def n(self) -> int:
        return self.x.size

    @classmethod
    def origin(cls, n: int = 1) -> "KineticPoint":
        return cls(0.0, np.zeros(n), np.zeros(n))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KineticPoint):
            return NotImplemented
        return (
            self.t == other.t
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.v, other.v)
        )

    def __hash__(self) -> int:
        return hash((self.t, self.x.tobytes(), self.v.tobytes()))

    def allclose(self, other: "KineticPoint", atol: float = 1e-12) -> bool:
        return (
            abs(self.t - other.t) <= atol
            and np.allclose(self.x, other.x, rtol=0, atol=atol)
            and np.allclose(self.v, other.v, rtol=0, atol=atol)
        )

    def __repr__(self) -> str:
        if self.n == 1:
            return f"KineticPoint(t={self.t:g}, x={self.x[0]:g}, v={self.v[0]:g})"
        return f"KineticPoint(t={self.t:g}, x={self.x.tolist()}, v={self.v.tolist()})"


def _same_dim(*points: KineticPoint) -> None:
    if len({p.n for p in points}) != 1:
        raise ValidationError("kinetic points have different dimensions")


def group_compose(z0: KineticPoint, z: KineticPoint) -> KineticPoint:
    _same_dim(z0, z)
    return KineticPoint(z0.t + z.t, z0.x + z.x + z.t * z0.v, z0.v + z.v)


def inverse(z: KineticPoint) -> KineticPoint:
    return KineticPoint(-z.t, -z.x + z.t * z.v, -z.v)


def kinetic_scale(r: float, z: KineticPoint) -> KineticPoint:
    if not r > 0:
        raise DomainError("kinetic_scale: r must be positive")
    return KineticPoint(r * r * z.t, r**3 * z.x, r * z.v)


def quasi_norm(z1: KineticPoint, z2: KineticPoint) -> float:
    """|z2⁻¹ ∘ z1| = max{|t1-t2|^{1/2}, |x1-x2-(t1-t2)v2|^{1/3}, |v1-v2|}."""
    _same_dim(z1, z2)
    tau = z1.t - z2.t
    return max(
        math.sqrt(abs(tau)),
        float(np.linalg.norm(z1.x - z2.x - tau * z2.v)) ** (1 / 3),
        float(np.linalg.norm(z1.v - z2.v)),
    )


# ------------------------------------------------------------------ distance


def kinetic_distance_1d(t1, x1, v1, t2, x2, v2) -> np.ndarray:
    """Vectorized distance for n = 1.

    max(|τ|^{1/2}, ·) is peeled off; the remaining minimax of
    A(w) = |d - τw|^{1/3} and B(w) = max(|v1-w|, |v2-w|) sits at the midpoint
    of v1, v2 when A is already below B there, and otherwise at the unique
    crossing A = B between the midpoint and the zero of A.
    """
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t1, x1, v1, t2, x2, v2)))
    shape = arrays[0].shape
    t1, x1, v1, t2, x2, v2 = (np.atleast_1d(a).ravel() for a in arrays)
    tau = t1 - t2
    d = x1 - x2
    half = 0.5 * np.abs(v1 - v2)
    mid = 0.5 * (v1 + v2)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_mid = np.abs(d - tau * mid) ** (1 / 3)
        value = np.maximum(a_mid, half)
        need = (tau != 0) & (a_mid > half)
        if np.any(need):
            wa = d[need] / tau[need]
            wb = mid[need]
            tn, dn, hn = tau[need], d[need], half[need]
            lo = np.zeros(wa.shape)
            hi = np.ones(wa.shape)
            for _ in range(80):
                u = 0.5 * (lo + hi)
                w = wb + u * (wa - wb)
                gap = np.abs(dn - tn * w) ** (1 / 3) - (np.abs(w - wb) + hn)
                lo = np.where(gap > 0, u, lo)
                hi = np.where(gap > 0, hi, u)
            w = wb + hi * (wa - wb)
            value[need] = np.abs(w - wb) + hn
    out = np.maximum(np.sqrt(np.abs(tau)), value)
    return out.reshape(shape) if shape else out[0]


def _golden_min(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    xm = 0.5 * (a + b)
    return xm, f(xm)


def kinetic_distance(z1: KineticPoint, z2: KineticPoint) -> float:
    """Kinetic distance between two points of the same dimension.

    The optimal w lies in the affine hull of v1, v2 and (x1-x2)/(t1-t2), so
    the search is at most two-dimensional: collinear configurations use the
    one-dimensional solution, the others a nested golden-section search
    (the objective is quasi-convex, so partial minimization keeps it
    unimodal) with a 1e-12 bracket.
    """
    _same_dim(z1, z2)
    tau = z1.t - z2.t
    d = z1.x - z2.x
    if z1.n == 1:
        return float(kinetic_distance_1d(z1.t, z1.x[0], z1.v[0], z2.t, z2.x[0], z2.v[0]))
    time_part = math.sqrt(abs(tau))
    if tau == 0.0:
        return max(time_part, float(np.linalg.norm(d)) ** (1 / 3), 0.5 * float(np.linalg.norm(z1.v - z2.v)))

    c0, c1, c2 = z1.v, z2.v, d / tau
    e1 = c1 - c0
    n1 = float(np.linalg.norm(e1))
    if n1 == 0.0:
        e1 = c2 - c0
        n1 = float(np.linalg.norm(e1))
        if n1 == 0.0:
            return max(time_part, 0.0)
    e1 = e1 / n1
    r2 = c2 - c0 - np.dot(c2 - c0, e1) * e1
    n2 = float(np.linalg.norm(r2))
    scale = max(float(np.linalg.norm(c2 - c0)), n1)
    if n2 <= 1e-14 * max(scale, 1.0):
        # collinear: reduce to the line through c0 along e1
        p1 = float(np.dot(c1 - c0, e1))
        p2 = float(np.dot(c2 - c0, e1))
        # |d - τw| = |τ||c2 - w|; encode as a 1-d problem with x-offset τ·p2
        return float(kinetic_distance_1d(tau, tau * p2, 0.0, 0.0, 0.0, p1))
    # 2-d coordinates of the three centers
    P = [(0.0, 0.0), (float(np.dot(c1 - c0, e1)), 0.0), (float(np.dot(c2 - c0, e1)), n2)]
    atau = abs(tau)

    def objective(a: float, b: float) -> float:
        da = math.hypot(a - P[0][0], b - P[0][1])
        db = math.hypot(a - P[1][0], b - P[1][1])
        dc = (atau * math.hypot(a - P[2][0], b - P[2][1])) ** (1 / 3)
        return max(da, db, dc)

    xs = [p[0] for p in P]
    ys = [p[1] for p in P]
    tol = 1e-12 * max(1.0, scale)

    def inner(a: float) -> float:
        return _golden_min(lambda b: objective(a, b), min(ys), max(ys), tol)[1]

    _, best = _golden_min(inner, min(xs), max(xs), tol)
    return max(time_part, best)


# ----------------------------------------------------------------- cylinders


@dataclass(frozen=True)
class KineticCylinder:
    """Q_r(z0) = {|t-t0| < r², |x-x0-(t-t0)v0| < r³, |v-v0| < r}.

    With ``half_space`` the set is intersected with {x_n > 0}.
    """

    center: KineticPoint
    r: float
    half_space: bool = False

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise DomainError("cylinder radius must be positive")


def cylinder_contains(c: KineticCylinder, z: KineticPoint) -> bool:
    _same_dim(c.center, z)
    z0, r = c.center, c.r
    dt = z.t - z0.t
    if not abs(dt) < r * r:
        return False
    if not float(np.linalg.norm(z.x - z0.x - dt * z0.v)) < r**3:
        return False
    if not float(np.linalg.norm(z.v - z0.v)) < r:
        return False
    if c.half_space and not z.x[-1] > 0:
        return False
    return True


def kinetic_dist_to_grazing(z: KineticPoint) -> float:
    """max{x_n^{1/3}, |v_n|}: comparable to the distance to the grazing set."""
    if z.x[-1] < 0:
        raise DomainError("kinetic_dist_to_grazing: point outside the half-space")
    return max(float(z.x[-1]) ** (1 / 3), abs(float(z.v[-1])))


@dataclass(frozen=True)
class CylinderSample:
    """Quasi-random points of a one-dimensional cylinder (n = 1)."""

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    # unit-cube preimages in (-1, 1)^3, identical for every radius
    unit: np.ndarray


def sample_cylinder(c: KineticCylinder, n_points: int = 256) -> CylinderSample:
    """First ``n_points`` Sobol points of Q_r(z0) (and of {x > 0} if required).

    The unit-cube sequence does not depend on r, so samples of cylinders
    centred on the grazing origin are exact dilations of one another.
    """
    if c.center.n != 1:
        raise ValidationError("sample_cylinder: only n = 1 is supported")
    z0, r = c.center, c.r
    t0, x0, v0 = z0.t, float(z0.x[0]), float(z0.v[0])
    engine = qmc.Sobol(d=3, scramble=False)
    engine.fast_forward(1)  # skip the corner point
    kept: list[np.ndarray] = []
    count = 0
    drawn = 0
    while count < n_points:
        u = 2.0 * engine.random(1024) - 1.0
        drawn += 1024
        t = t0 + r * r * u[:, 0]
        x = x0 + (t - t0) * v0 + r**3 * u[:, 1]
        ok = np.abs(u).max(axis=1) < 1.0
        if c.half_space:
            ok &= x > 0
        kept.append(u[ok])
        count += int(ok.sum())
        if drawn > 1024 * 64 and count == 0:
            raise ValidationError("sample_cylinder: empty intersection with the half-space")
    unit = np.concatenate(kept)[:n_points]
    t = t0 + r * r * unit[:, 0]
    x = x0 + (t - t0) * v0 + r**3 * unit[:, 1]
    v = v0 + r * unit[:, 2]
    return CylinderSample(t=t, x=x, v=v, unit=unit)
