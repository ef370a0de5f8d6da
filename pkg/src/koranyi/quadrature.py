"""Integration back-ends on the sphere and the ball.

Monte Carlo draws come in fixed-size chunks, each with its own generator
keyed by ``(seed, chunk_index)``, so the stream does not depend on how
chunks are distributed over workers; partial sums are reduced in chunk order.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate, special

from .geometry import Cap, green_function

CHUNK = 1 << 15
METHODS = ("monte-carlo", "zonal-2d", "radial-1d", "product")
MEASURES = ("lebesgue-nu", "bergman-dg", "green-G-dg")


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "monte-carlo"
    samples: int = 200_000
    epsilon: float = 1e-3
    seed: int = 0
    workers: int = 1
    inner_samples: int = 2048

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown quadrature method {self.method!r}; valid: {', '.join(METHODS)}")
        if self.samples < 1:
            raise ValueError("samples must be positive")
        if self.inner_samples < 1:
            raise ValueError("inner_samples must be positive")
        if not 0.0 < self.epsilon <= 0.1:
            raise ValueError("epsilon must lie in (0, 0.1]")

    def with_(self, **kw) -> "QuadratureSpec":
        return replace(self, **kw)

    def digest(self) -> str:
        import hashlib

        key = f"{self.method}|{self.samples}|{self.inner_samples}|{self.epsilon!r}|{self.seed}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass
class IntegralResult:
    value: float
    std_error: float = 0.0
    samples_used: int = 0
    eps_delta: float | None = None
    diverging: bool = False

    def __post_init__(self):
        if self.std_error < 0:
            raise ValueError("std_error must be non-negative")


# -- seeded chunk machinery -----------------------------------------------------------

def chunk_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), index]))


def _chunks(total: int):
    out, k = [], 0
    while total > 0:
        m = min(CHUNK, total)
        out.append((k, m))
        total -= m
        k += 1
    return out


def map_chunks(fn: Callable, total: int, workers: int = 1) -> list:
    """Apply ``fn(index, size)`` to every chunk; results keep chunk order."""
    parts = _chunks(total)
    if workers <= 1 or len(parts) == 1:
        return [fn(i, m) for i, m in parts]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(lambda p: fn(*p), parts))


def _reduce(parts) -> tuple[float, float, int, float]:
    """Combine (sum, sumsq, count, maxabs) chunk tuples in order."""
    s = sum(p[0] for p in parts)
    ss = sum(p[1] for p in parts)
    m = sum(p[2] for p in parts)
    mx = max(p[3] for p in parts)
    return s, ss, m, mx


def _mean_se(s, ss, m):
    mean = s / m
    var = max(ss / m - mean * mean, 0.0)
    return mean, math.sqrt(var / max(m - 1, 1))


def gaussian_sphere(rng: np.random.Generator, count: int, n: int) -> np.ndarray:
    g = rng.standard_normal((count, 2 * n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g[:, 0::2] + 1j * g[:, 1::2]


def sample_sphere(count: int, n: int, seed: int) -> np.ndarray:
    """``count`` points distributed by sigma, shape (count, n)."""
    if count < 1:
        raise ValueError("count must be positive")
    return np.concatenate([gaussian_sphere(chunk_rng(seed, i), m, n) for i, m in _chunks(count)])


def _orthogonal_unit(rng, c: np.ndarray, count: int) -> np.ndarray:
    n = c.size
    g = rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))
    g -= (g @ np.conj(c))[:, None] * c[None, :]
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sample_cap(cap: Cap, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points uniformly distributed (w.r.t. sigma) inside ``cap``.

    lambda = <zeta, centre> has density (n-1)/pi (1-|lambda|^2)^(n-2) on the
    disc; in coordinates lambda = 1 - rho e^{i psi} the cap is rho < delta^2.
    rho and psi are drawn by rejection, the orthogonal part uniformly.
    """
    c = cap.center.coords
    n = c.size
    t = cap.radius ** 2
    if n == 1:
        theta_max = math.acos(max(-1.0, 1.0 - t * t / 2.0))
        theta = rng.uniform(-theta_max, theta_max, count)
        return (np.exp(1j * theta) * c[0])[:, None]
    rho = np.empty(0)
    psi = np.empty(0)
    while rho.size < count:
        m = 2 * (count - rho.size) + 16
        r = t * rng.uniform(size=m) ** (1.0 / n)
        p = rng.uniform(-math.pi / 2, math.pi / 2, m)
        c2 = 2 * np.cos(p)
        ok = r < c2
        ok &= rng.uniform(size=m) < np.where(ok, (np.maximum(c2 - r, 0) / 2.0) ** (n - 2), 0.0)
        rho = np.concatenate([rho, r[ok]])
        psi = np.concatenate([psi, p[ok]])
    lam = 1.0 - rho[:count] * np.exp(1j * psi[:count])
    perp = _orthogonal_unit(rng, c, count)
    return lam[:, None] * c[None, :] + np.sqrt(np.maximum(1.0 - np.abs(lam) ** 2, 0.0))[:, None] * perp


# -- one-dimensional rules ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _leg(m: int):
    return np.polynomial.legendre.leggauss(m)


@lru_cache(maxsize=None)
def _jac(m: int, beta: float):
    x, w = special.roots_jacobi(m, 0.0, beta)
    return x, w


def radial_integral(g: Callable, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Adaptive 1-D integral of ``g`` over [lo, hi] (QUADPACK)."""
    if not lo < hi:
        raise ValueError("need lo < hi")
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, lo, hi, epsabs=tol, epsrel=0.0, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"radial integral did not converge: {exc}") from exc
    return float(val)


# -- zonal rule --------------------------------------------------------------------------

def _graded_panels(s0: float, per_panel: int):
    """Nodes/weights for [s0, 1] on dyadic panels [2^-k-1, 2^-k]."""
    k = max(1, int(math.ceil(math.log2(1.0 / s0))))
    x, w = _leg(per_panel)
    edges = 2.0 ** -np.arange(k, -1, -1.0)
    a, b = edges[:-1], edges[1:]
    nodes = (0.5 * (b - a)[:, None] * (x[None, :] + 1) + a[:, None]).ravel()
    weights = (0.5 * (b - a)[:, None] * w[None, :]).ravel()
    return nodes, weights, edges[0]


def _psi_rule(psi_star: float, per_panel: int, levels: int):
    """Angular nodes on (-pi/2, pi/2): a flat middle part |psi| < psi_star and
    panels graded geometrically towards +-pi/2."""
    x, w = _leg(per_panel)
    nodes, weights = [], []
    if psi_star > 0:
        for a, b in zip(np.linspace(-psi_star, psi_star, 5)[:-1], np.linspace(-psi_star, psi_star, 5)[1:]):
            nodes.append(0.5 * (b - a) * (x + 1) + a)
            weights.append(0.5 * (b - a) * w)
    gap = math.pi / 2 - psi_star
    if gap > 0:
        d = gap * 2.0 ** -np.arange(0, levels + 1.0)
        d = np.append(d, 0.0)
        for hi_d, lo_d in zip(d[:-1], d[1:]):
            for sign in (1.0, -1.0):
                a = math.pi / 2 - hi_d
                b = math.pi / 2 - lo_d
                t = 0.5 * (b - a) * (x + 1) + a
                nodes.append(sign * t)
                weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def zonal_integral(
    g: Callable,
    n: int,
    rho_max: float = 2.0,
    pole_exponent: float = 0.0,
    peak_scale: float = 1.0,
    per_panel: int = 12,
) -> float:
    """int over {|1 - lambda| < rho_max} of g(lambda) d sigma, lambda = <xi, eta>.

    For n >= 2 the sphere integral reduces to the disc with density
    (n-1)/pi (1-|lambda|^2)^(n-2); it is evaluated in polar coordinates
    lambda = 1 - rho e^{i psi} about the pole, where
    1 - |lambda|^2 = rho (2 cos psi - rho).  The radial variable is graded
    dyadically down to ``peak_scale``/100 and the innermost panel uses
    Gauss-Jacobi with weight rho^(n-1+pole_exponent), so ``g`` may behave like
    |1-lambda|^pole_exponent at the pole (pole_exponent > -n).  n = 1 uses the
    circle with the same grading in the angle.
    """
    if pole_exponent <= -n:
        raise QuadratureError("integrand is not integrable at the pole")
    rho_max = min(float(rho_max), 2.0)
    s0 = min(0.5, 0.01 * peak_scale / max(rho_max, 1e-300))
    s_nodes, s_w, s_first = _graded_panels(s0, per_panel)
    if n == 1:
        theta_max = 2.0 * math.asin(rho_max / 2.0)
        beta = pole_exponent
        xj, wj = _jac(per_panel, beta)
        t_in = 0.5 * s_first * (xj + 1)
        w_in = (0.5 * s_first) ** (beta + 1) * wj
        tot = 0.0
        for sign in (1.0, -1.0):
            tot += theta_max * np.sum(s_w * g(np.exp(1j * sign * theta_max * s_nodes)))
            lam = np.exp(1j * sign * theta_max * t_in)
            tot += theta_max * np.sum(w_in * g(lam) * t_in ** (-pole_exponent))
        return float(tot / (2.0 * math.pi))
    psi_star = math.acos(rho_max / 2.0)
    psi, wpsi = _psi_rule(psi_star, 16, 24)
    c2 = 2.0 * np.cos(psi)
    m = np.minimum(rho_max, c2)[:, None]
    beta = n - 1 + pole_exponent
    xj, wj = _jac(per_panel, beta)
    s_in = 0.5 * s_first * (xj + 1)
    w_in = (0.5 * s_first) ** (beta + 1) * wj

    def body(s):
        rho = m * s[None, :]
        lam = 1.0 - rho * np.exp(1j * psi)[:, None]
        return lam, rho, (c2[:, None] - rho) ** (n - 2)

    lam, rho, fac = body(s_nodes)
    outer = np.sum(s_w[None, :] * fac * rho ** (n - 1) * g(lam), axis=1) * m[:, 0]
    lam, rho, fac = body(s_in)
    inner = np.sum(w_in[None, :] * fac * g(lam) * rho ** (-pole_exponent), axis=1) * m[:, 0] ** (beta + 1)
    return float((n - 1) / math.pi * np.sum(wpsi * (outer + inner)))


# -- product rule ---------------------------------------------------------------------

@lru_cache(maxsize=32)
def product_rule(n: int, m: int):
    """Tensor rule on the sphere: stick-breaking for |zeta_k|^2 (Gauss-Jacobi)
    times equispaced phases.  Returns (points (N, n), weights (N,))."""
    if n == 1:
        th = 2 * math.pi * (np.arange(2 * m) + 0.5) / (2 * m)
        return np.exp(1j * th)[:, None], np.full(2 * m, 1.0 / (2 * m))
    # squared moduli via nested Beta(1, n-1-k) factors
    mods = [np.ones(1)]
    wts = np.ones(1)
    rest = np.ones(1)
    parts = []
    for k in range(n - 1):
        a = n - 2 - k  # Beta(1, a+1) density (a+1)(1-t)^a
        x, w = special.roots_jacobi(m, float(a), 0.0)
        t = 0.5 * (x + 1)
        wt = w * (a + 1) / 2.0 ** (a + 1)
        take = rest[:, None] * t[None, :]
        parts = [np.repeat(p, m) for p in parts]
        parts.append(take.ravel())
        rest = (rest[:, None] * (1 - t[None, :])).ravel()
        wts = (wts[:, None] * wt[None, :]).ravel()
    parts.append(rest)
    sq = np.stack(parts, axis=1)
    nph = 2 * m
    ph = 2 * math.pi * np.arange(nph) / nph
    grids = np.meshgrid(*([ph] * n), indexing="ij")
    phases = np.stack([g.ravel() for g in grids], axis=1)
    pts = np.sqrt(sq)[:, None, :] * np.exp(1j * phases)[None, :, :]
    w = (wts[:, None] * np.full(phases.shape[0], 1.0 / phases.shape[0])[None, :]).ravel()
    return pts.reshape(-1, n), w


# -- sphere integrals -----------------------------------------------------------------

def sphere_integral(
    f: Callable | None,
    spec: QuadratureSpec,
    n: int,
    profile: Callable | None = None,
    pole_exponent: float = 0.0,
    peak_scale: float = 1.0,
) -> IntegralResult:
    """Integral of ``f`` over the sphere against normalised sigma.

    ``f`` maps (m, n) complex arrays to (m,) values.  The zonal-2d method
    instead takes ``profile``, the function g with f(xi) = g(<xi, eta0>).
    """
    if spec.method == "zonal-2d":
        if profile is None:
            raise QuadratureError("zonal-2d needs the zonal profile of the integrand")
        if n < 2:
            raise QuadratureError("zonal-2d reduction is only valid for n >= 2")
        v = zonal_integral(profile, n, pole_exponent=pole_exponent, peak_scale=peak_scale)
        return IntegralResult(v, 0.0, 0)
    if f is None:
        raise QuadratureError(f"{spec.method} needs a sphere function")
    if spec.method == "product":
        m = max(2, int(round(spec.samples ** (1.0 / (2 * n - 1)) / 1.5)))
        pts, w = product_rule(n, m)
        return IntegralResult(float(np.sum(w * f(pts))), 0.0, w.size)
    if spec.method != "monte-carlo":
        raise QuadratureError(f"{spec.method} is not a sphere rule")

    def part(i, m):
        vals = np.asarray(f(gaussian_sphere(chunk_rng(spec.seed, i), m, n)), dtype=float)
        return vals.sum(), (vals * vals).sum(), m, float(np.max(np.abs(vals)))

    s, ss, m, mx = _reduce(map_chunks(part, spec.samples, spec.workers))
    mean, se = _mean_se(s, ss, m)
    return IntegralResult(mean, se, m, diverging=bool(mx > 0.5 * abs(s)) and m > 1000)


# -- ball integrals -------------------------------------------------------------------------

def _radial_shape(measure: str, n: int, r: np.ndarray) -> np.ndarray:
    base = r ** (2 * n - 1)
    if measure == "lebesgue-nu":
        return base
    if measure == "bergman-dg":
        return base / (1.0 - r * r)
    if measure == "green-G-dg":
        return green_function(r, n) * base / (1.0 - r * r) ** n
    raise ValueError(f"unknown measure {measure!r}; valid: {', '.join(MEASURES)}")


def target_radial_density(measure: str, n: int, r):
    """Radial density of the target measure: 2n r^(2n-1) times the measure's weight."""
    r = np.asarray(r, dtype=float)
    base = 2 * n * r ** (2 * n - 1)
    if measure == "lebesgue-nu":
        return base
    if measure == "bergman-dg":
        return base * (1.0 - r * r) ** (-(n + 1))
    if measure == "green-G-dg":
        return base * green_function(r, n) * (1.0 - r * r) ** (-(n + 1))
    raise ValueError(f"unknown measure {measure!r}")


@dataclass(frozen=True)
class RadialSampler:
    """Piecewise-constant importance density on [lo, hi]."""

    edges: np.ndarray
    cdf: np.ndarray
    dens: np.ndarray

    def draw(self, rng: np.random.Generator, m: int):
        u = rng.uniform(size=m)
        k = np.searchsorted(self.cdf, u, side="right") - 1
        k = np.clip(k, 0, self.dens.size - 1)
        r = self.edges[k] + rng.uniform(size=m) * (self.edges[k + 1] - self.edges[k])
        return r, self.dens[k]


@lru_cache(maxsize=64)
def radial_sampler(measure: str, n: int, hi: float, lo: float = 0.0) -> RadialSampler:
    gap = 1.0 - hi
    e1 = np.linspace(lo, min(0.9, hi), 4001)
    e2 = 1.0 - np.geomspace(max(0.1, 1.0 - e1[-1]), gap, 4000)
    edges = np.unique(np.concatenate([e1, e2[e2 > e1[-1]]]))
    mids = 0.5 * (edges[1:] + edges[:-1])
    mass = _radial_shape(measure, n, mids) * np.diff(edges)
    mass /= mass.sum()
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    return RadialSampler(edges, cdf[:-1], mass / np.diff(edges))


def ball_integral(h: Callable, measure: str, spec: QuadratureSpec, n: int, with_rng: bool = False,
                  proposal: str | None = None) -> IntegralResult:
    """Monte Carlo estimate of the integral of ``h`` over |z| <= 1 - eps.

    Radii come from an importance density (r^(2n-1) for nu, r^(2n-1)/(1-r^2)
    for dg, G(r) r^(2n-1)/(1-r^2)^n for G dg), directions from sigma.
    Draws extend to 1 - eps/2; ``eps_delta`` is the change in the estimate
    when the truncation is halved.  ``proposal`` names a different measure
    whose radial shape drives the draws.  With ``with_rng`` the integrand is called
    as ``h(z, rng)`` so it can draw inner samples from the chunk's stream.
    """
    if spec.method == "radial-1d":
        raise QuadratureError("radial-1d needs a radial profile; use radial_ball_integral")
    eps = spec.epsilon
    hi = 1.0 - eps / 2.0
    sampler = radial_sampler(proposal or measure, n, hi)

    def part(i, m):
        rng = chunk_rng(spec.seed, i)
        r, q = sampler.draw(rng, m)
        u = gaussian_sphere(rng, m, n)
        z = r[:, None] * u
        hv = h(z, rng) if with_rng else h(z)
        vals = np.asarray(hv, dtype=float) * target_radial_density(measure, n, r) / q
        inner = np.where(r <= 1.0 - eps, vals, 0.0)
        outer = vals - inner
        return (inner.sum(), (inner * inner).sum(), m, float(np.max(np.abs(inner))), outer.sum())

    parts = map_chunks(part, spec.samples, spec.workers)
    s, ss, m, mx = _reduce(parts)
    tail = sum(p[4] for p in parts) / m
    mean, se = _mean_se(s, ss, m)
    return IntegralResult(mean, se, m, eps_delta=tail, diverging=bool(mx > 0.5 * abs(s)) and m > 1000)


def radial_ball_integral(h_radial: Callable, measure: str, n: int, epsilon: float, tol: float = 1e-10) -> IntegralResult:
    """Deterministic integral of a radial function h(|z|) over |z| <= 1 - eps."""
    f = lambda r: float(h_radial(r) * target_radial_density(measure, n, r))
    lo = 1e-300 if measure == "green-G-dg" else 0.0
    v = radial_integral(f, lo, 1.0 - epsilon, tol)
    v2 = radial_integral(f, 1.0 - epsilon, 1.0 - epsilon / 2.0, tol)
    return IntegralResult(v, 0.0, 0, eps_delta=v2)


def cap_design(centers, radii, count: int, rng: np.random.Generator):
    """Weighted points for integrating over many caps at once.

    Returns (points (N, count, n), weights (N, count)) with
    sum_j weights[i, j] F(points[i, j]) an unbiased estimate of the integral
    of F over cap i against sigma (not normalised by the cap measure).
    rho = |1 - <zeta, centre>| is drawn with density n rho^(n-1)/t^n on
    [0, t = radius^2] and psi uniformly; the importance weight
    (n-1)/n t^n (2 cos psi - rho)^(n-2) [rho < 2 cos psi] / count
    restores the zonal density.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=complex))
    radii = np.broadcast_to(np.asarray(radii, dtype=float), centers.shape[:1])
    N, n = centers.shape
    t = np.minimum(radii ** 2, 2.0)[:, None]
    if n == 1:
        theta_max = np.arccos(np.clip(1.0 - t * t / 2.0, -1.0, 1.0))
        theta = (2 * rng.uniform(size=(N, count)) - 1) * theta_max
        pts = (np.exp(1j * theta) * centers[:, :1])[..., None]
        return pts, np.broadcast_to(theta_max / math.pi / count, (N, count)).copy()
    rho = t * rng.uniform(size=(N, count)) ** (1.0 / n)
    psi = rng.uniform(-math.pi / 2, math.pi / 2, (N, count))
    c2 = 2 * np.cos(psi)
    w = np.where(rho < c2, (n - 1) / n * t ** n * np.maximum(c2 - rho, 0.0) ** (n - 2), 0.0) / count
    lam = np.where(rho < c2, 1.0 - rho * np.exp(1j * psi), 1.0)  # rejected draws sit on the centre
    g = rng.standard_normal((N, count, n)) + 1j * rng.standard_normal((N, count, n))
    g -= np.einsum("ijk,ik->ij", g, np.conj(centers))[..., None] * centers[:, None, :]
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    pts = lam[..., None] * centers[:, None, :] + np.sqrt(np.maximum(1.0 - np.abs(lam) ** 2, 0.0))[..., None] * g
    return pts, w


__all__ = [
    "CHUNK",
    "IntegralResult",
    "QuadratureError",
    "QuadratureSpec",
    "RadialSampler",
    "ball_integral",
    "cap_design",
    "chunk_rng",
    "gaussian_sphere",
    "map_chunks",
    "product_rule",
    "radial_ball_integral",
    "radial_integral",
    "radial_sampler",
    "sample_cap",
    "sample_sphere",
    "sphere_integral",
    "target_radial_density",
    "zonal_integral",
]
