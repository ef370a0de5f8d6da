import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_ball, random_sphere
from koranyi.geometry import (
    SQRT2,
    BallPoint,
    Cap,
    GeometryError,
    KoranyiRegion,
    SpherePoint,
    bergman_metric_inverse,
    bergman_metric_matrix,
    cap_for_point,
    cap_measure,
    cap_radius_for_measure,
    envelope_cap,
    envelope_counterexamples,
    green_function,
    green_vs_power_check,
    hermitian_inner,
    in_cap,
    in_koranyi,
    mobius_transform,
    noniso_distance,
    point_for_cap,
    region_probe,
    to_real,
    triangle_violations,
    volume_density,
)

# independent oracles: lens area of the unit disc and |1 - lambda| < delta^2 (n = 2),
# and a cartesian double integral of (2/pi)(1 - |lambda|^2) over the same lens (n = 3)
CAP_ORACLE = {
    (0.5, 2): 0.0295895324921523717,
    (1.0, 2): 0.3910022189557706419,
    (0.5, 3): 0.0113720148576973046,
    (1.0, 3): 0.4134966715663440371,
}


def test_point_validation():
    with pytest.raises(GeometryError):
        BallPoint(np.array([1.0, 0.0]))
    with pytest.raises(GeometryError):
        SpherePoint(np.zeros(2))
    assert np.allclose(SpherePoint(np.array([0.5, 0.0])).coords, [1.0, 0.0])
    with pytest.raises(GeometryError):
        Cap(SpherePoint.basis(2), 1.5)


def test_real_round_trip(rng):
    z = random_ball(rng, 1, 3)[0]
    assert np.allclose(BallPoint.from_real(to_real(z)).coords, z)
    p = BallPoint(z)
    assert p.n == 3 and abs(p.norm - np.linalg.norm(z)) < 1e-15


def test_distance_examples():
    e1 = SpherePoint.basis(2, 0)
    assert noniso_distance(e1, e1) == 0.0
    assert abs(noniso_distance(e1, SpherePoint.basis(2, 1)) - 1.0) < 1e-15
    assert abs(noniso_distance(e1, SpherePoint(-e1.coords)) - SQRT2) < 1e-15


@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_distance_symmetric_and_bounded(n, seed):
    rng = np.random.default_rng(seed)
    x, y = random_sphere(rng, 2, n)
    d1, d2 = noniso_distance(x, y), noniso_distance(y, x)
    assert abs(d1 - d2) < 1e-15
    assert 0.0 <= d1 <= SQRT2 + 1e-15


@pytest.mark.parametrize("n", [1, 2, 3])
def test_triangle_inequality(n):
    assert triangle_violations(n, 20_000, seed=n) == 0


def test_aperture_bound():
    with pytest.raises(GeometryError):
        KoranyiRegion(SpherePoint.basis(2), 0.5)
    assert region_probe(2, 0.4, 100_000, seed=1) == 0
    assert region_probe(2, 0.6, 10_000, seed=1) > 0


def test_origin_only_in_wide_regions():
    e = SpherePoint.basis(2)
    assert not in_koranyi(np.zeros(2), KoranyiRegion(e, 0.9))
    assert in_koranyi(np.zeros(2), KoranyiRegion(e, 1.1))


@pytest.mark.parametrize("a", [0.75, 1.0, 2.0])
def test_envelope_contains_vertices(a):
    bad, tested = envelope_counterexamples(2, a, 20_000, seed=3)
    assert tested > 0 and bad == 0


def test_envelope_cap_radius():
    z = np.array([0.6, 0.0])
    c = envelope_cap(z, 1.0)
    assert abs(c.radius - 2.0 * 0.8) < 1e-15 or c.radius == SQRT2
    with pytest.raises(GeometryError):
        envelope_cap(np.zeros(2), 1.0)


@pytest.mark.parametrize("delta,n", sorted(CAP_ORACLE))
def test_cap_measure_oracle(delta, n):
    assert abs(cap_measure(delta, n) - CAP_ORACLE[(delta, n)]) < 1e-13


def test_cap_measure_circle_closed_form():
    d = np.linspace(0.05, SQRT2, 40)
    assert np.allclose(cap_measure(d, 1), np.arccos(np.clip(1 - d ** 4 / 2, -1, 1)) / math.pi, atol=1e-15)
    assert abs(cap_measure(SQRT2, 1) - 1.0) < 1e-12


@pytest.mark.parametrize("n", [2, 3, 5])
def test_cap_measure_full_and_small(n):
    assert abs(cap_measure(SQRT2, n) - 1.0) < 1e-12
    # small caps scale like delta^(2n)
    d = np.array([1e-3, 2e-3])
    m = cap_measure(d, n)
    assert abs(math.log(m[1] / m[0], 2) - 2 * n) < 1e-3


@given(st.integers(1, 4), st.floats(0.01, 1.4))
def test_cap_measure_monotone_and_inverse(n, delta):
    m = cap_measure(delta, n)
    assert 0 < m <= 1
    assert cap_measure(min(delta * 1.01, SQRT2), n) >= m
    assert abs(cap_radius_for_measure(m, n) - delta) < 1e-9


def test_cap_measure_matches_monte_carlo(rng):
    x = random_sphere(rng, 400_000, 2)
    frac = np.mean(np.abs(1 - x[:, 0]) < 0.7 ** 2)
    se = math.sqrt(frac * (1 - frac) / x.shape[0])
    assert abs(frac - cap_measure(0.7, 2)) < 4 * se


@pytest.mark.parametrize("n", [1, 2, 3])
def test_cap_point_correspondence(n, rng):
    z = random_ball(rng, 1, n, 0.9)[0]
    cap = cap_for_point(z)
    assert abs(cap.measure - (1 - np.linalg.norm(z)) ** n) < 1e-10
    assert np.allclose(point_for_cap(cap).coords, z, atol=1e-8)


def test_in_cap():
    cap = Cap(SpherePoint.basis(2), 0.5)
    assert in_cap(np.array([1.0, 0.0]), cap)
    assert not in_cap(np.array([0.0, 1.0]), cap)


def test_bergman_metric_inverse(rng):
    z = random_ball(rng, 5, 3)
    prod = bergman_metric_matrix(z) @ bergman_metric_inverse(z)
    assert np.allclose(prod, np.eye(3), atol=1e-12)
    assert abs(bergman_metric_matrix(np.zeros(2))[0, 0] - 3.0) < 1e-15


def test_volume_density():
    assert volume_density(np.zeros(2)) == 1.0
    assert abs(volume_density(np.array([0.5, 0.0])) - 0.75 ** -3) < 1e-12
    with pytest.raises(GeometryError):
        volume_density(np.array([1.0 - 1e-9, 0.0]))


@pytest.mark.parametrize("r", [0.05, 0.3, 0.7, 0.95, 0.999])
def test_green_closed_forms(r):
    # n = 1: -log r; n = 2: (3/8)(1/u - 1 + log u) with u = r^2
    assert abs(green_function(r, 1) - (-math.log(r))) < 1e-13 * max(1, -math.log(r))
    u = r * r
    g2 = 3 / 8 * (1 / u - 1 + math.log(u))
    assert abs(green_function(r, 2) - g2) < 1e-12 * max(1.0, g2)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_green_at_least_power(n):
    r = np.concatenate([np.linspace(1e-3, 0.999, 500), 1 - np.geomspace(1e-3, 1e-6, 50)])
    assert np.min(green_vs_power_check(r, n)) >= 1.0
    with pytest.raises(GeometryError):
        green_function(1.0, n)


@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_mobius_involution_and_swap(n, seed):
    rng = np.random.default_rng(seed)
    a, z = random_ball(rng, 2, n, 0.9)
    assert np.allclose(mobius_transform(a, mobius_transform(a, z)), z, atol=1e-10)
    assert np.allclose(mobius_transform(a, a), 0, atol=1e-12)
    assert np.allclose(mobius_transform(a, np.zeros(n)), a, atol=1e-14)


@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_mobius_identity(n, seed):
    # 1 - |phi_a(z)|^2 = (1 - |a|^2)(1 - |z|^2) / |1 - <z, a>|^2
    rng = np.random.default_rng(seed)
    a, z = random_ball(rng, 2, n, 0.9)
    w = mobius_transform(a, z)
    lhs = 1 - np.sum(np.abs(w) ** 2)
    rhs = (1 - np.sum(np.abs(a) ** 2)) * (1 - np.sum(np.abs(z) ** 2)) / abs(1 - hermitian_inner(z, a)) ** 2
    assert abs(lhs - rhs) < 1e-11


def test_mobius_preserves_sphere(rng):
    a = random_ball(rng, 1, 3, 0.9)[0]
    x = random_sphere(rng, 100, 3)
    assert np.allclose(np.linalg.norm(mobius_transform(a, x), axis=-1), 1.0, atol=1e-12)
