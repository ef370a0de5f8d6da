"""Points, caps and Korányi regions of the unit ball in C^n.

Points are stored as complex numpy vectors of length ``n``; the dataclasses
below are thin validated wrappers.  All numeric helpers also accept raw
complex arrays of shape ``(..., n)`` so they vectorise over batches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

EPS_BOUNDARY = 1e-6
SQRT2 = math.sqrt(2.0)


class GeometryError(ValueError):
    pass


def _coords(p) -> np.ndarray:
    if isinstance(p, (BallPoint, SpherePoint)):
        return p.coords
    return np.asarray(p, dtype=complex)


def from_real(x) -> np.ndarray:
    """(Re z1, Im z1, ..., Re zn, Im zn) -> complex vector(s)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] % 2:
        raise GeometryError("real coordinate vector must have even length")
    return x[..., 0::2] + 1j * x[..., 1::2]


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(z.shape[:-1] + (2 * z.shape[-1],))
    out[..., 0::2] = z.real
    out[..., 1::2] = z.imag
    return out


@dataclass(frozen=True)
class BallPoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=complex).reshape(-1)
        if c.size == 0:
            raise GeometryError("dimension must be positive")
        r = np.linalg.norm(c)
        if not r < 1.0 - EPS_BOUNDARY:
            raise GeometryError(f"|z| = {r!r} is not inside the ball (limit 1 - {EPS_BOUNDARY})")
        object.__setattr__(self, "coords", c)

    @classmethod
    def from_real(cls, x) -> "BallPoint":
        return cls(from_real(x))

    @property
    def n(self) -> int:
        return self.coords.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


@dataclass(frozen=True)
class SpherePoint:
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=complex).reshape(-1)
        r = np.linalg.norm(c)
        if c.size == 0 or r == 0:
            raise GeometryError("cannot normalise a zero vector onto the sphere")
        object.__setattr__(self, "coords", c / r)

    @classmethod
    def from_real(cls, x) -> "SpherePoint":
        return cls(from_real(x))

    @classmethod
    def basis(cls, n: int, k: int = 0) -> "SpherePoint":
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        return cls(e)

    @property
    def n(self) -> int:
        return self.coords.size


@dataclass(frozen=True)
class Cap:
    """Non-isotropic ball {eta : |1 - <eta, center>|^(1/2) < radius} on the sphere."""

    center: SpherePoint
    radius: float

    def __post_init__(self):
        if not 0.0 < self.radius <= SQRT2:
            raise GeometryError(f"cap radius must lie in (0, sqrt 2], got {self.radius!r}")

    @property
    def n(self) -> int:
        return self.center.n

    @property
    def measure(self) -> float:
        return cap_measure(self.radius, self.n)

    def dilate(self, factor: float) -> "Cap":
        """Cap with the same centre and radius scaled by ``factor``, clipped at sqrt 2."""
        return Cap(self.center, min(SQRT2, self.radius * factor))


@dataclass(frozen=True)
class KoranyiRegion:
    vertex: SpherePoint
    aperture: float

    def __post_init__(self):
        if not self.aperture > 0.5:
            raise GeometryError(f"aperture must exceed 1/2 (region is empty), got {self.aperture!r}")


def hermitian_inner(u, v) -> complex | np.ndarray:
    """<u, v> = sum_k u_k conj(v_k), broadcasting over leading axes."""
    a, b = _coords(u), _coords(v)
    if a.shape[-1] != b.shape[-1]:
        raise GeometryError(f"dimension mismatch: {a.shape[-1]} vs {b.shape[-1]}")
    return np.sum(a * np.conj(b), axis=-1)


def noniso_distance(xi, eta) -> float | np.ndarray:
    return np.sqrt(np.abs(1.0 - hermitian_inner(xi, eta)))


def in_koranyi(z, region: KoranyiRegion) -> bool | np.ndarray:
    zc = _coords(z)
    lhs = np.abs(1.0 - hermitian_inner(zc, region.vertex))
    rhs = region.aperture * (1.0 - np.sum(np.abs(zc) ** 2, axis=-1))
    return lhs < rhs


def in_cap(eta, cap: Cap) -> bool | np.ndarray:
    return noniso_distance(eta, cap.center) < cap.radius


def envelope_cap(z, a: float) -> Cap:
    """Cap E(z) that contains every vertex zeta with z in Gamma_a(zeta)."""
    if not a > 0.5:
        raise GeometryError("aperture must exceed 1/2")
    zc = _coords(z)
    r = np.linalg.norm(zc)
    if r == 0:
        raise GeometryError("envelope cap is undefined at z = 0")
    radius = (math.sqrt(a) + 1.0) * math.sqrt(1.0 - r * r)
    return Cap(SpherePoint(zc / r), min(SQRT2, radius))


def envelope_radius(r, a: float):
    return np.minimum(SQRT2, (np.sqrt(a) + 1.0) * np.sqrt(1.0 - np.asarray(r) ** 2))


# -- cap measure -------------------------------------------------------------

@lru_cache(maxsize=None)
def _gl(m: int):
    return np.polynomial.legendre.leggauss(m)


def _gl_on(a, b, m):
    x, w = _gl(m)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def cap_measure(delta, n: int) -> float | np.ndarray:
    """Normalised surface measure of a cap of radius ``delta``.

    n = 1 uses the arc-length closed form.  For n >= 2 the zonal reduction to
    the disc is integrated in polar coordinates centred at the pole; the
    radial integrand is a polynomial, so Gauss-Legendre with n nodes is exact
    and only the angular integral is approximated (64 nodes per smooth piece).
    """
    d = np.asarray(delta, dtype=float)
    if np.any(d <= 0) or np.any(d > SQRT2 + 1e-15):
        raise GeometryError("cap radius must lie in (0, sqrt 2]")
    if n == 1:
        return np.arccos(np.clip(1.0 - d ** 4 / 2.0, -1.0, 1.0)) / math.pi
    out = np.vectorize(lambda t: _cap_measure_scalar(float(t), n), otypes=[float])(d)
    return out if out.ndim else float(out)


def _cap_measure_scalar(delta: float, n: int) -> float:
    rho_cap = min(delta * delta, 2.0)
    psi_star = math.acos(rho_cap / 2.0)
    s, ws = _gl(max(n, 2))
    # |psi| > psi_star: the whole chord 0 < rho < 2cos(psi) lies in the cap
    total = 0.0
    if psi_star < math.pi / 2:
        beta = math.gamma(n) * math.gamma(n - 1) / math.gamma(2 * n - 1)
        psi, wp = _gl_on(psi_star, math.pi / 2, 64)
        total += 2.0 * beta * np.sum(wp * (2.0 * np.cos(psi)) ** (2 * n - 2))
    if psi_star > 0:
        psi, wp = _gl_on(-psi_star, psi_star, 64)
        rho = 0.5 * rho_cap * (s[None, :] + 1.0)
        wr = 0.5 * rho_cap * ws[None, :]
        c2 = 2.0 * np.cos(psi)[:, None]
        inner = np.sum(wr * (rho * (c2 - rho)) ** (n - 2) * rho, axis=1)
        total += np.sum(wp * inner)
    return (n - 1) / math.pi * total


def cap_radius_for_measure(measure: float, n: int) -> float:
    """Invert delta -> cap_measure(delta, n) by bisection."""
    if not 0.0 < measure <= 1.0:
        raise GeometryError("cap measure must lie in (0, 1]")
    if n == 1:
        return float((2.0 * (1.0 - math.cos(math.pi * measure))) ** 0.25)
    lo, hi = 0.0, SQRT2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if _cap_measure_scalar(mid, n) < measure:
            lo = mid
        else:
            hi = mid
    return hi


def cap_for_point(z) -> Cap:
    """Cap centred at z/|z| with measure (1 - |z|)^n.

    The other common convention (1 - |z|^2)^n differs by the factor (1 + |z|)^n <= 2^n.
    """
    zc = _coords(z)
    r = float(np.linalg.norm(zc))
    if r == 0:
        raise GeometryError("cap_for_point is undefined at z = 0")
    n = zc.size
    return Cap(SpherePoint(zc / r), cap_radius_for_measure((1.0 - r) ** n, n))


def point_for_cap(cap: Cap) -> BallPoint:
    """Inverse of :func:`cap_for_point`."""
    r = 1.0 - cap.measure ** (1.0 / cap.n)
    return BallPoint(r * cap.center.coords)


# -- Bergman geometry --------------------------------------------------------

def _check_inside(zc):
    if np.any(np.sum(np.abs(zc) ** 2, axis=-1) >= (1.0 - EPS_BOUNDARY) ** 2):
        raise GeometryError("point too close to the boundary")


def bergman_metric_matrix(z) -> np.ndarray:
    zc = _coords(z)
    _check_inside(zc)
    n = zc.shape[-1]
    s = 1.0 - np.sum(np.abs(zc) ** 2, axis=-1)[..., None, None]
    outer = np.conj(zc)[..., :, None] * zc[..., None, :]
    return (n + 1) / s ** 2 * (s * np.eye(n) + outer)


def bergman_metric_inverse(z) -> np.ndarray:
    zc = _coords(z)
    _check_inside(zc)
    n = zc.shape[-1]
    s = 1.0 - np.sum(np.abs(zc) ** 2, axis=-1)[..., None, None]
    outer = np.conj(zc)[..., :, None] * zc[..., None, :]
    return s / (n + 1) * (np.eye(n) - outer)


def volume_density(z, eps: float = EPS_BOUNDARY):
    """Density of dg with respect to normalised Lebesgue measure."""
    zc = _coords(z)
    r2 = np.sum(np.abs(zc) ** 2, axis=-1)
    if np.any(r2 > (1.0 - eps) ** 2):
        raise GeometryError("point outside the truncated ball")
    n = zc.shape[-1]
    return (1.0 - r2) ** (-(n + 1))


# -- Green's function ----------------------------------------------------------

def green_function(r, n: int):
    """G(r) = (n+1)/(2n) * int_r^1 (1-t^2)^(n-1) t^(1-2n) dt.

    With u = t^2 the integral is (n+1)/(4n) int_{r^2}^1 (1-u)^(n-1) u^(-n) du.
    For r^2 < 1/2 the binomial expansion is used; for r^2 >= 1/2 we integrate
    s^(n-1) (1-s)^(-n) over s in [0, 1-r^2] with Gauss-Legendre, which is
    accurate to round-off there because (1-s)^(-n) is bounded by 2^n.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= 1):
        raise GeometryError("green_function needs 0 < r < 1")
    u = r * r
    out = np.empty_like(u)
    small = u < 0.5
    if np.any(small):
        us = u[small]
        acc = np.zeros_like(us)
        for k in range(n):
            c = math.comb(n - 1, k) * (-1) ** k
            p = k - n + 1
            if p == 0:
                acc += c * (-np.log(us))
            else:
                acc += c * (1.0 - us ** p) / p
        out[small] = acc
    if np.any(~small):
        ul = 1.0 - u[~small]
        x, w = _gl(40)
        s = 0.5 * ul[:, None] * (x[None, :] + 1.0)
        out[~small] = 0.5 * ul * np.sum(w * s ** (n - 1) * (1.0 - s) ** (-n), axis=1)
    out *= (n + 1) / (4.0 * n)
    return out if out.ndim else float(out)


def green_vs_power_check(r, n: int):
    """(4n^2/(n+1)) G(r) / (1-r^2)^n; at least 1 on (0, 1)."""
    r = np.asarray(r, dtype=float)
    return 4.0 * n * n / (n + 1) * green_function(r, n) / (1.0 - r * r) ** n


# -- automorphisms ---------------------------------------------------------------

def mobius_transform(a, z) -> np.ndarray:
    """Involutive automorphism phi_a exchanging 0 and a; phi_0(z) = -z.

    Broadcasts over leading axes of ``a`` and ``z``; also valid for |z| = 1.
    """
    ac, zc = _coords(a), _coords(z)
    a2 = np.sum(np.abs(ac) ** 2, axis=-1)[..., None]
    za = np.sum(zc * np.conj(ac), axis=-1)[..., None]
    s = np.sqrt(1.0 - a2)
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.where(a2 > 0, za / np.where(a2 > 0, a2, 1.0) * ac, 0.0)
    return (ac - proj - s * (zc - proj)) / (1.0 - za)


# -- property probes ---------------------------------------------------------------

def _random_sphere(rng, count, n):
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def _near(rng, base, scale):
    g = base + scale[:, None] * (rng.standard_normal(base.shape) + 1j * rng.standard_normal(base.shape))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def triangle_violations(n: int, count: int, seed: int = 0, tol: float = 1e-13) -> int:
    """Count triples with d(xi, eta) > d(xi, zeta) + d(zeta, eta) + tol.

    Half the triples are uniform, half are clustered at random scales so that
    all three distances are small together.
    """
    rng = np.random.default_rng(seed)
    xi = _random_sphere(rng, count, n)
    scale = np.where(np.arange(count) < count // 2, 10.0, 10.0 ** rng.uniform(-6, 0, count))
    eta = _near(rng, xi, scale)
    zeta = _near(rng, xi, scale)
    lhs = noniso_distance(xi, eta)
    rhs = noniso_distance(xi, zeta) + noniso_distance(zeta, eta)
    return int(np.count_nonzero(lhs > rhs + tol))


def envelope_counterexamples(n: int, a: float, count: int, seed: int = 0) -> tuple[int, int]:
    """(counterexamples, points tested) for z in Gamma_a(zeta) implying zeta in E(z)."""
    rng = np.random.default_rng(seed)
    bad = tested = 0
    while tested < count:
        m = 4 * (count - tested)
        zeta = _random_sphere(rng, m, n)
        s = 10.0 ** rng.uniform(-6, 0, m)
        r = 1.0 - s
        z = r[:, None] * _near(rng, zeta, np.sqrt(s) * rng.uniform(0, 2 * math.sqrt(a), m))
        inside = np.abs(1.0 - hermitian_inner(z, zeta)) < a * (1.0 - np.sum(np.abs(z) ** 2, axis=-1))
        z, zeta = z[inside][: count - tested], zeta[inside][: count - tested]
        rz = np.linalg.norm(z, axis=-1)
        rad = envelope_radius(rz, a)
        bad += int(np.count_nonzero(noniso_distance(zeta, z / rz[:, None]) >= rad))
        tested += z.shape[0]
    return bad, tested


def region_probe(n: int, a: float, count: int, seed: int = 0) -> int:
    """Number of probes (z, zeta) with |1 - <z, zeta>| < a (1 - |z|^2).

    Probes concentrate near the vertex, where the region would first appear;
    for a <= 1/2 the count must be 0 because |1 - <z, zeta>| >= 1 - |z|.
    """
    rng = np.random.default_rng(seed)
    zeta = _random_sphere(rng, count, n)
    s = 10.0 ** rng.uniform(-8, 0, count)
    z = (1.0 - s)[:, None] * _near(rng, zeta, s * rng.uniform(0, 1, count))
    lhs = np.abs(1.0 - hermitian_inner(z, zeta))
    return int(np.count_nonzero(lhs < a * (1.0 - np.sum(np.abs(z) ** 2, axis=-1))))
