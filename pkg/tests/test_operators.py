import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_ball, random_sphere
from koranyi.functions import Constant, CoordinateRealPart, HarmonicPoly, RePower, f_alpha, power_weight
from koranyi.geometry import GeometryError, cap_measure, envelope_radius, mobius_transform
from koranyi.operators import (
    _fubini_factor,
    area_integral_norm,
    gradient_sq,
    gradient_sq_fd,
    kappa_norm,
    koranyi_design,
    square_function_sq,
    weighted_boundary_norm,
)
from koranyi.quadrature import QuadratureSpec


def _exact(f):
    return lambda w: f.exact_extension(w)


@given(st.integers(1, 4), st.integers(0, 2 ** 31))
def test_kappa_calibration(n, seed):
    rng = np.random.default_rng(seed)
    f = RePower(n, 2, random_sphere(rng, 1, n)[0]) if seed % 2 else CoordinateRealPart(n, 0, 0.3 + 1j)
    z = random_ball(rng, 1, n, 0.9)[0]
    c = gradient_sq_fd(_exact(f), z, "contraction")
    m = gradient_sq_fd(_exact(f), z, "mobius-pullback")
    assert abs(c - kappa_norm(n) * m) < 1e-6 * max(m, 1e-3)


@given(st.integers(2, 3), st.integers(0, 2 ** 31))
def test_gradient_is_mobius_invariant(n, seed):
    rng = np.random.default_rng(seed)
    f = HarmonicPoly(n)
    a, z = random_ball(rng, 2, n, 0.7)
    u = _exact(f)
    composed = lambda w: u(mobius_transform(a, w))
    lhs = gradient_sq_fd(composed, z)
    rhs = gradient_sq_fd(u, mobius_transform(a, z))
    assert abs(lhs - rhs) < 1e-6 * max(rhs, 1e-3)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_gradient_closed_form_re_z1(n, rng):
    z = random_ball(rng, 8, n, 0.9)
    exact = (1 - np.sum(np.abs(z) ** 2, -1)) * (1 - np.abs(z[:, 0]) ** 2) / (n + 1)
    fd = np.array([gradient_sq_fd(_exact(CoordinateRealPart(n)), p) for p in z])
    assert np.allclose(fd, exact, rtol=1e-7, atol=1e-12)
    mc = gradient_sq(CoordinateRealPart(n), z, QuadratureSpec(inner_samples=1 << 15))
    assert np.allclose(mc, exact, rtol=0.1, atol=1e-3)


def test_constant_has_zero_gradient_and_square_function():
    z = np.array([[0.2, 0.1j]])
    assert gradient_sq(Constant(2), z, QuadratureSpec())[0] == 0.0
    res = square_function_sq(Constant(2), np.array([1.0, 0.0]), 1.0, QuadratureSpec(samples=1000))
    assert res.value == 0.0


def test_aperture_rejected():
    with pytest.raises(GeometryError):
        square_function_sq(CoordinateRealPart(2), np.array([1.0, 0.0]), 0.5, QuadratureSpec(samples=100))


def test_koranyi_design_support(rng):
    zeta = np.array([1.0, 0.0])
    z, w, r = koranyi_design(zeta, 1.0, 2, 5000, rng, 0.999)
    live = w > 0
    assert live.any()
    lhs = np.abs(1 - z[live, 0])
    assert np.all(lhs < 1.0 * (1 - np.sum(np.abs(z[live]) ** 2, -1)))


def test_fubini_factor_bounded_by_envelope(rng):
    z = random_ball(rng, 50, 2, 0.95)
    W = _fubini_factor(z, 1.0, Constant(2), 256, rng)
    env = cap_measure(envelope_radius(np.linalg.norm(z, axis=-1), 1.0), 2)
    assert np.all(W >= 0) and np.all(W <= env * 1.5)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_area_integral_littlewood_paley(n):
    # ||f||^2 = 2 * area^2 for mean-zero f; Re zeta_1 has ||f||^2 = 1 / (2n)
    res = area_integral_norm(CoordinateRealPart(n), Constant(n), QuadratureSpec(samples=40_000, inner_samples=64,
                                                                                epsilon=1e-4, seed=n))
    se = 2 * 2 * res.value * res.std_error  # std error of 2 area^2
    assert abs(2 * res.value ** 2 - 1 / (2 * n)) < 4 * se + 1e-4  # plus the truncation bias


@pytest.mark.parametrize("n", [1, 2, 3])
def test_weighted_boundary_norm_zonal_vs_mc(n):
    f, w = f_alpha(n, 0.2), power_weight(n, 0.5)
    z = weighted_boundary_norm(f, w, QuadratureSpec(method="zonal-2d"))
    mc = weighted_boundary_norm(f, w, QuadratureSpec(samples=400_000))
    assert abs(z.value - mc.value) < 4 * mc.std_error


def test_weighted_boundary_norm_divergence():
    res = weighted_boundary_norm(f_alpha(2, 1.5), power_weight(2, 0.5), QuadratureSpec(method="zonal-2d"))
    assert res.diverging and res.value == float("inf")
