"""M-harmonic calculus: extensions, invariant gradients, S_a and the weighted norms.

Gradient magnitudes are in canonical units

    |grad~ u|^2 = 4 sum_ij g^{ij} dbar_i u d_j u,

with g^{ij} the inverse Bergman metric normalised so that the invariant
Laplacian is 4 sum g^{ij} d_j dbar_i.  The Mobius-pullback magnitude
|grad (u o phi_z)(0)|^2 is (n + 1) times larger (see ``kappa_norm``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .extension import extension, grad_form, grad_sq_from_derivs, mc_extension, on_pole_line
from .functions import Constant, SphereFunction
from .geometry import (
    BallPoint,
    KoranyiRegion,
    SpherePoint,
    _coords,
    envelope_radius,
    in_koranyi,
    mobius_transform,
)
from .quadrature import (
    IntegralResult,
    QuadratureSpec,
    ball_integral,
    cap_design,
    chunk_rng,
    map_chunks,
    radial_sampler,
    sample_sphere,
    sphere_integral,
    target_radial_density,
    zonal_integral,
)

GRADIENT_METHODS = ("contraction", "mobius-pullback")


def kappa_norm(n: int) -> float:
    """Contraction magnitude divided by Mobius-pullback magnitude.

    phi_z maps 0 to z with d phi_z(0) = -(s P + s^(1/2) (I - P)) (s = 1 - |z|^2,
    P the projection on z), and the inverse metric at z is s/(n+1) (I - conj z z^T),
    which transports to 1/(n+1) times the identity at 0.
    """
    return 1.0 / (n + 1)


@dataclass(frozen=True)
class GradientSample:
    point: BallPoint
    magnitude_sq: float
    method: str

    def __post_init__(self):
        if self.method not in GRADIENT_METHODS:
            raise ValueError(f"unknown gradient method {self.method!r}")


# -- pointwise quantities ---------------------------------------------------------

def poisson_extend(f: SphereFunction, z, quad: QuadratureSpec):
    """f~(z); scalar for a single point, array for a batch."""
    zc = _coords(z.coords if isinstance(z, BallPoint) else z)
    v, _ = extension(f, zc, quad)
    return float(v) if np.ndim(v) == 0 else v


def gradient_sq(f: SphereFunction, z, quad: QuadratureSpec, method: str = "contraction",
                route: str = "mobius", rng: np.random.Generator | None = None) -> np.ndarray:
    """|grad~ f~|^2 at a batch of points (see module docstring for units).

    With ``rng`` the estimate is unbiased but noisy pointwise (it may dip
    below zero); integrals over many points should use that mode.  Without it
    the value is the nonnegative magnitude of one fixed-sample gradient.
    """
    if method not in GRADIENT_METHODS:
        raise ValueError(f"unknown gradient method {method!r}; valid: {', '.join(GRADIENT_METHODS)}")
    zc = np.asarray(z, dtype=complex)
    if isinstance(f, Constant):
        return np.zeros(zc.shape[:-1])
    _, _, d = mc_extension(f, zc, quad, route, gradient=method, rng=rng)
    if rng is not None:
        return grad_form(zc, d[0], d[1], method)
    return grad_sq_from_derivs(zc, d, method)


def invariant_gradient_sq(f: SphereFunction, z, quad: QuadratureSpec, method: str = "contraction") -> GradientSample:
    p = z if isinstance(z, BallPoint) else BallPoint(z)
    v = gradient_sq(f, p.coords[None, :], quad, method)[0]
    return GradientSample(p, float(v), method)


def _real_grad_fd(u, x0: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of u at a complex point, as (d/dx_k, d/dy_k) pairs."""
    n = x0.size
    steps = np.concatenate([np.eye(n), 1j * np.eye(n)]) * h
    pts = np.concatenate([x0 + steps, x0 - steps])
    vals = np.asarray(u(pts), dtype=float)
    g = (vals[: 2 * n] - vals[2 * n:]) / (2 * h)
    return g[:n], g[n:]


def gradient_sq_fd(u, z, method: str = "contraction", h: float = 1e-6) -> float:
    """|grad~ u|^2 of a ball function by central differences.

    contraction: Wirtinger derivatives at z contracted with the inverse metric;
    mobius-pullback: Euclidean gradient of u o phi_z at the origin.
    """
    zc = _coords(z.coords if isinstance(z, BallPoint) else z).reshape(-1)
    if method == "contraction":
        gx, gy = _real_grad_fd(u, zc, min(h, (1.0 - np.linalg.norm(zc)) / 4))
        return float(grad_sq_from_derivs(zc, 0.5 * (gx - 1j * gy)))
    if method == "mobius-pullback":
        gx, gy = _real_grad_fd(lambda w: u(mobius_transform(zc, w)), np.zeros_like(zc), h)
        return float(np.sum(gx ** 2 + gy ** 2))
    raise ValueError(f"unknown gradient method {method!r}")


# -- square function -------------------------------------------------------------------

def _root(res: IntegralResult) -> IntegralResult:
    v = max(res.value, 0.0)
    r = float(np.sqrt(v))
    se = res.std_error / (2 * r) if r > 0 else float(np.sqrt(res.std_error))
    delta = None if res.eps_delta is None else float(np.sqrt(v + res.eps_delta) - r)
    return IntegralResult(r, se, res.samples_used, delta, res.diverging)


def koranyi_design(zeta, a: float, n: int, count: int, rng: np.random.Generator, hi: float):
    """Weighted points for integrals over Gamma_a(zeta) against dg, |z| < hi.

    Radii follow the G dg importance density (the slice of the region at
    radius r has measure of order (1-r^2)^n); directions come from the
    envelope cap around zeta.  Returns (z, weights, r).
    """
    zeta = SpherePoint(np.asarray(zeta, dtype=complex))
    region = KoranyiRegion(zeta, a)
    sampler = radial_sampler("green-G-dg", n, hi)
    r, q = sampler.draw(rng, count)
    pts, cw = cap_design(np.broadcast_to(zeta.coords, (count, n)), envelope_radius(r, a), 1, rng)
    z = r[:, None] * pts[:, 0, :]
    w = cw[:, 0] * target_radial_density("bergman-dg", n, r) / q
    return z, np.where(in_koranyi(z, region), w, 0.0), r


def square_function_sq(f: SphereFunction, zeta, a: float, quad: QuadratureSpec) -> IntegralResult:
    """S_a(f)(zeta)^2, truncated at |z| <= 1 - epsilon."""
    zc = _coords(zeta.coords if isinstance(zeta, SpherePoint) else zeta)
    n = zc.size
    KoranyiRegion(SpherePoint(zc), a)  # validates the aperture
    eps = quad.epsilon
    tag = int(np.abs(zc).sum() * 1e6) & 0xFFFF

    def part(i, m):
        rng = chunk_rng(quad.seed + (tag << 20), i)
        z, w, r = koranyi_design(zc, a, n, m, rng, 1.0 - eps / 2)
        live = w != 0
        vals = np.zeros(m)
        if np.any(live):
            vals[live] = w[live] * gradient_sq(f, z[live], quad, rng=rng)
        inner = np.where(r <= 1.0 - eps, vals, 0.0)
        return inner.sum(), (inner * inner).sum(), m, (vals - inner).sum()

    parts = map_chunks(part, quad.samples, quad.workers)
    s = sum(p[0] for p in parts)
    ss = sum(p[1] for p in parts)
    m = sum(p[2] for p in parts)
    mean = s / m
    se = float(np.sqrt(max(ss / m - mean * mean, 0.0) / m))
    return IntegralResult(float(mean), se, m, eps_delta=sum(p[3] for p in parts) / m)


def square_function(f: SphereFunction, zeta, a: float, quad: QuadratureSpec) -> float:
    return _root(square_function_sq(f, zeta, a, quad)).value


# -- norms ------------------------------------------------------------------------------

def _weight_extension(w: SphereFunction, z, quad: QuadratureSpec, rng=None):
    if isinstance(w, Constant):
        return np.full(np.shape(z)[:-1], w.value)
    return mc_extension(w, z, quad, "mobius", rng=rng)[0]


def area_integral_norm(f: SphereFunction, w: SphereFunction, quad: QuadratureSpec) -> IntegralResult:
    """(int_B |grad~ f~|^2 w~ G dg)^(1/2), truncated at 1 - epsilon."""
    n = f.n

    def h(z, rng):
        return gradient_sq(f, z, quad, rng=rng) * _weight_extension(w, z, quad, rng)

    return _root(ball_integral(h, "green-G-dg", quad, n, with_rng=True))


def _lift(lam, pole: np.ndarray) -> np.ndarray:
    """A sphere point with <xi, pole> = lam (|lam| = 1 when n = 1)."""
    n = pole.size
    if n == 1:
        return np.asarray(lam, dtype=complex)[..., None] * pole
    e = np.zeros(n, dtype=complex)
    e[int(np.argmin(np.abs(pole)))] = 1.0
    e -= np.vdot(pole, e) * pole
    e /= np.linalg.norm(e)
    lam = np.asarray(lam, dtype=complex)
    return lam[..., None] * pole + np.sqrt(np.maximum(1.0 - np.abs(lam) ** 2, 0.0))[..., None] * e


def _pole_exponent(f: SphereFunction) -> float:
    t = f.zonal_terms()
    return t[0].pole_exponent if t and len(t) == 1 else 0.0


def weighted_boundary_norm(f: SphereFunction, w: SphereFunction, quad: QuadratureSpec) -> IntegralResult:
    """(int_S f^2 w d sigma)^(1/2).

    With the zonal rule both functions must be zonal about the same pole;
    the pole singularity of f^2 w is handed to the Gauss-Jacobi panel.
    """
    n = f.n
    if quad.method == "zonal-2d":
        if not (f.is_zonal and w.is_zonal and np.allclose(f.pole.coords, w.pole.coords)):
            raise ValueError("zonal-2d boundary norm needs f and w zonal about one pole")
        pole = f.pole.coords
        gamma = 2 * _pole_exponent(f) + _pole_exponent(w)
        if gamma <= -n:
            return IntegralResult(float("inf"), 0.0, 0, diverging=True)
        prof = lambda lam: f(_lift(lam, pole)) ** 2 * w(_lift(lam, pole))
        res = IntegralResult(zonal_integral(prof, n, pole_exponent=gamma), 0.0, 0)
    else:
        res = sphere_integral(lambda x: f(x) ** 2 * w(x), quad, n)
    return _root(res)


def _fubini_factor(z, a: float, w: SphereFunction, count: int, rng) -> np.ndarray:
    """W_a(z) = int 1[z in Gamma_a(zeta)] w(zeta) d sigma(zeta) over the envelope cap."""
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    r = np.linalg.norm(z, axis=-1)
    centers = z / r[:, None]
    pts, cw = cap_design(centers, envelope_radius(r, a), count, rng)
    s = 1.0 - r * r
    inside = np.abs(1.0 - np.einsum("ik,ijk->ij", z, np.conj(pts))) < a * s[:, None]
    wv = w(pts.reshape(-1, n)).reshape(pts.shape[:2])
    return np.sum(np.where(inside, cw * wv, 0.0), axis=1)


def weighted_square_norm(f: SphereFunction, w: SphereFunction, a: float, quad: QuadratureSpec,
                         path: str = "fubini", inner_count: int = 64, outer_count: int | None = None) -> IntegralResult:
    """||S_a f||_{L^2(w)}.

    ``fubini`` integrates |grad~ f~|^2(z) W_a(z) dg(z) with W_a estimated
    from ``inner_count`` cap draws per z.  ``nested`` averages
    S_a(f)(zeta)^2 w(zeta) over ``outer_count`` vertices, each square
    function using ``quad.samples`` points; it costs the product of both and
    is kept as an oracle.
    """
    if not a > 0.5:
        raise ValueError("aperture must exceed 1/2")
    n = f.n
    if path == "fubini":
        def h(z, rng):
            return gradient_sq(f, z, quad, rng=rng) * _fubini_factor(z, a, w, inner_count, rng)

        return _root(ball_integral(h, "bergman-dg", quad, n, with_rng=True, proposal="green-G-dg"))
    if path != "nested":
        raise ValueError(f"unknown path {path!r}; valid: fubini, nested")
    k = outer_count or 64
    zetas = sample_sphere(k, n, quad.seed + 7)
    vals = np.empty(k)
    ses = np.empty(k)
    deltas = np.empty(k)
    for i, zeta in enumerate(zetas):
        res = square_function_sq(f, zeta, a, quad.with_(seed=quad.seed + 1000 * (i + 1)))
        wz = float(w(zeta[None, :])[0])
        vals[i], ses[i], deltas[i] = res.value * wz, res.std_error * wz, res.eps_delta * wz
    mean = vals.mean()
    # the spread over vertices already contains each inner estimator's noise
    se = float(np.sqrt(vals.var(ddof=1) / k)) if k > 1 else float(ses[0])
    return _root(IntegralResult(float(mean), se, k * quad.samples, float(deltas.mean())))


__all__ = [
    "GRADIENT_METHODS",
    "GradientSample",
    "area_integral_norm",
    "gradient_sq",
    "gradient_sq_fd",
    "invariant_gradient_sq",
    "kappa_norm",
    "koranyi_design",
    "on_pole_line",
    "poisson_extend",
    "square_function",
    "square_function_sq",
    "weighted_boundary_norm",
    "weighted_square_norm",
]
