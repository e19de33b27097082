import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grazing.errors import DomainError, ValidationError
from grazing.geometry import (
    KineticCylinder,
    KineticPoint,
    cylinder_contains,
    group_compose,
    inverse,
    kinetic_dist_to_grazing,
    kinetic_distance,
    kinetic_distance_1d,
    kinetic_scale,
    quasi_norm,
    sample_cylinder,
)

finite = st.floats(min_value=-3, max_value=3, allow_nan=False)


def point(n, rng):
    return KineticPoint(rng.normal(), rng.normal(size=n), rng.normal(size=n))


def brute_distance(z1, z2, half_width=6.0, n=4001, rounds=9):
    """Grid search for the minimizing w with repeated local zoom."""
    tau = z1.t - z2.t
    d = z1.x - z2.x
    dim = z1.n
    center = 0.5 * (z1.v + z2.v)
    width = half_width
    best = math.inf
    for _ in range(rounds):
        axes = [np.linspace(c - width, c + width, n if dim == 1 else 161) for c in center]
        W = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
        vals = np.maximum.reduce([
            np.full(len(W), math.sqrt(abs(tau))),
            np.linalg.norm(d - tau * W, axis=1) ** (1 / 3),
            np.linalg.norm(z1.v - W, axis=1),
            np.linalg.norm(z2.v - W, axis=1),
        ])
        k = int(np.argmin(vals))
        best = min(best, float(vals[k]))
        center = W[k]
        width *= 0.1
    return best


# ------------------------------------------------------------------- group


def test_compose_and_inverse():
    rng = np.random.default_rng(1)
    for n in (1, 3):
        a, b, c = point(n, rng), point(n, rng), point(n, rng)
        assert group_compose(group_compose(a, b), c).allclose(group_compose(a, group_compose(b, c)), atol=1e-12)
        assert group_compose(a, inverse(a)).allclose(KineticPoint.origin(n))
        assert group_compose(inverse(a), a).allclose(KineticPoint.origin(n))
    z0 = KineticPoint(1.0, 2.0, 3.0)
    z = KineticPoint(0.5, 0.25, -1.0)
    assert group_compose(z0, z) == KineticPoint(1.5, 2.0 + 0.25 + 0.5 * 3.0, 2.0)


def test_scaling_is_a_group_automorphism():
    rng = np.random.default_rng(2)
    a, b = point(2, rng), point(2, rng)
    r = 0.37
    lhs = kinetic_scale(r, group_compose(a, b))
    rhs = group_compose(kinetic_scale(r, a), kinetic_scale(r, b))
    assert lhs.allclose(rhs)
    assert kinetic_scale(2.0, KineticPoint(1.0, 1.0, 1.0)) == KineticPoint(4.0, 8.0, 2.0)
    with pytest.raises(DomainError):
        kinetic_scale(0.0, a)


def test_point_validation():
    with pytest.raises(ValidationError):
        KineticPoint(0.0, [1.0, 2.0], [1.0])
    with pytest.raises(ValidationError):
        group_compose(KineticPoint.origin(1), KineticPoint.origin(2))
    p = KineticPoint(0.0, [1.0], [2.0])
    assert hash(p) == hash(KineticPoint(0.0, 1.0, 2.0))


# ---------------------------------------------------------------- distance


def test_distance_basic_values():
    o = KineticPoint.origin()
    assert kinetic_distance(o, KineticPoint(0, 0, 1)) == pytest.approx(0.5, abs=1e-12)
    assert kinetic_distance(o, o) == 0.0
    assert kinetic_distance(o, KineticPoint(4.0, 0, 0)) == pytest.approx(2.0)
    assert kinetic_distance(o, KineticPoint(0, 8.0, 0)) == pytest.approx(2.0)


def test_distance_matches_grid_search_1d():
    rng = np.random.default_rng(3)
    for _ in range(40):
        a, b = point(1, rng), point(1, rng)
        assert kinetic_distance(a, b) == pytest.approx(brute_distance(a, b), abs=1e-7)


def test_distance_matches_grid_search_2d():
    rng = np.random.default_rng(4)
    for _ in range(8):
        a, b = point(2, rng), point(2, rng)
        assert kinetic_distance(a, b) == pytest.approx(brute_distance(a, b), abs=1e-6)


def test_distance_2d_reduces_to_1d():
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = point(1, rng), point(1, rng)
        lift = lambda z: KineticPoint(z.t, [z.x[0], 0.0], [z.v[0], 0.0])
        assert kinetic_distance(lift(a), lift(b)) == pytest.approx(kinetic_distance(a, b), abs=1e-10)


def test_distance_vectorized_matches_scalar():
    rng = np.random.default_rng(6)
    arr = rng.normal(size=(6, 50))
    vec = kinetic_distance_1d(*arr)
    for k in range(50):
        a = KineticPoint(arr[0, k], arr[1, k], arr[2, k])
        b = KineticPoint(arr[3, k], arr[4, k], arr[5, k])
        assert vec[k] == pytest.approx(kinetic_distance(a, b), abs=1e-14)


@settings(max_examples=80, deadline=None)
@given(finite, finite, finite, finite, finite, finite)
def test_distance_symmetric(t1, x1, v1, t2, x2, v2):
    a, b = KineticPoint(t1, x1, v1), KineticPoint(t2, x2, v2)
    assert kinetic_distance(a, b) == pytest.approx(kinetic_distance(b, a), abs=1e-10)


def test_distance_left_invariance_and_scaling():
    rng = np.random.default_rng(7)
    for n in (1, 2):
        for _ in range(30 if n == 1 else 5):
            a, b, z0 = point(n, rng), point(n, rng), point(n, rng)
            d = kinetic_distance(a, b)
            assert kinetic_distance(group_compose(z0, a), group_compose(z0, b)) == pytest.approx(d, abs=1e-9)
            r = float(rng.uniform(0.1, 3.0))
            assert kinetic_distance(kinetic_scale(r, a), kinetic_scale(r, b)) == pytest.approx(r * d, abs=1e-9)


def test_quasi_triangle_and_quasi_norm_comparability():
    rng = np.random.default_rng(8)
    tri, ratio = [], []
    for n, trials in ((1, 2000), (2, 150)):
        for _ in range(trials):
            a, b, c = point(n, rng), point(n, rng), point(n, rng)
            tri.append(kinetic_distance(a, c) / (kinetic_distance(a, b) + kinetic_distance(b, c)))
            ratio.append(kinetic_distance(a, b) / quasi_norm(a, b))
    assert max(tri) <= 4.0
    assert 0.25 <= min(ratio) and max(ratio) <= 4.0
    # the distance never exceeds the quasi-norm (w = v2 is admissible)
    assert max(ratio) <= 1.0 + 1e-12


# ---------------------------------------------------------------- cylinders


def test_cylinder_contains():
    c = KineticCylinder(KineticPoint.origin(), 1.0)
    assert cylinder_contains(c, KineticPoint(0.5, 0.1, 0.5))
    assert not cylinder_contains(c, KineticPoint(1.0, 0.0, 0.0))
    assert not cylinder_contains(c, KineticPoint(0.0, 1.0, 0.0))
    slanted = KineticCylinder(KineticPoint(0.0, 0.0, 2.0), 1.0)
    assert cylinder_contains(slanted, KineticPoint(0.5, 1.0 + 0.5, 2.0))
    half = KineticCylinder(KineticPoint.origin(), 1.0, half_space=True)
    assert not cylinder_contains(half, KineticPoint(0.0, -0.1, 0.0))
    with pytest.raises(DomainError):
        KineticCylinder(KineticPoint.origin(), 0.0)


def test_cylinder_sample_inside_and_dilation_exact():
    c1 = KineticCylinder(KineticPoint.origin(), 1.0, half_space=True)
    c2 = KineticCylinder(KineticPoint.origin(), 0.25, half_space=True)
    s1, s2 = sample_cylinder(c1, 200), sample_cylinder(c2, 200)
    assert len(s1.t) == 200
    for t, x, v in zip(s1.t, s1.x, s1.v):
        assert cylinder_contains(c1, KineticPoint(t, x, v))
    np.testing.assert_allclose(s2.x, 0.25**3 * s1.x, rtol=1e-14)
    np.testing.assert_allclose(s2.v, 0.25 * s1.v, rtol=1e-14)


def test_dist_to_grazing_proxy():
    assert kinetic_dist_to_grazing(KineticPoint(0, 8.0, 1.0)) == pytest.approx(2.0)
    assert kinetic_dist_to_grazing(KineticPoint(0, 0.001, -0.5)) == pytest.approx(0.5)
    r = 0.3
    z = KineticPoint(0, 0.2, 0.4)
    assert kinetic_dist_to_grazing(kinetic_scale(r, z)) == pytest.approx(r * kinetic_dist_to_grazing(z))
    with pytest.raises(DomainError):
        kinetic_dist_to_grazing(KineticPoint(0, -1.0, 0.0))
