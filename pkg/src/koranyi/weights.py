"""Weights on the sphere and estimates of the two A_2 characteristics.

Both characteristics are suprema over uncountable families.  The estimates
here are maxima over documented finite search families, so they are lower
bounds that come with the maximising cap or point as a witness.

Averages over a cap use a self-normalised rule (the same weighted points for
w and 1/w, divided by their total weight), which makes every probed product
at least 1 by Cauchy-Schwarz, exactly as for the true quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .extension import mc_extension, zonal_extension
from .functions import Constant, Pullback, SphereFunction
from .geometry import SQRT2, BallPoint, Cap, SpherePoint, cap_measure, mobius_transform, point_for_cap
from .quadrature import QuadratureSpec, cap_design, chunk_rng, zonal_integral


@dataclass(frozen=True)
class CharacteristicEstimate:
    value: float
    witness: Cap | BallPoint | None
    budget: int
    details: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.value >= 1.0 - 1e-9:
            raise ValueError(f"A2 characteristic estimate below 1: {self.value!r}")


@dataclass(frozen=True)
class CapSearch:
    """Caps: net centres (plus pole-centred and pole-offset caps for zonal
    weights) times radii sqrt(2) 2^(-j/per_octave), j = 0..levels."""

    centers: int = 32
    levels: int = 16
    per_octave: int = 1
    cap_samples: int = 4096
    offsets: tuple = (0.25, 0.5, 1.0)

    def radii(self) -> np.ndarray:
        return SQRT2 * 2.0 ** (-np.arange(self.levels + 1) / self.per_octave)


@dataclass(frozen=True)
class BallSearch:
    """Points: net directions times radii 1 - 2^(-j/per_octave) up to 1 - epsilon,
    plus the origin.  Zonal weights also get a refined search on the ray to the pole."""

    directions: int = 32
    per_octave: int = 2
    ray: bool = True

    def radii(self, epsilon: float) -> np.ndarray:
        jmax = int(math.floor(self.per_octave * math.log2(1.0 / epsilon)))
        r = 1.0 - 2.0 ** (-np.arange(1, jmax + 1) / self.per_octave)
        return np.unique(np.concatenate([[0.0], r[r < 1.0 - epsilon], [1.0 - epsilon]]))


def sphere_net(count: int, n: int, include=None) -> np.ndarray:
    """Deterministic, well-spread points on the sphere (additive recurrence in
    2n real dimensions pushed through the Gaussian quantile, then normalised)."""
    d = 2 * n
    phi = 2.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (d + 1))
    alpha = phi ** -np.arange(1, d + 1)
    u = np.mod(0.5 + np.outer(np.arange(1, count + 1), alpha), 1.0)
    g = special.ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    z = g[:, 0::2] + 1j * g[:, 1::2]
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    if include is not None:
        z = np.vstack([np.atleast_2d(np.asarray(include, dtype=complex)), z])
    return z


# -- evaluation ---------------------------------------------------------------------

def evaluate_weight(w: SphereFunction, xi) -> float | np.ndarray:
    """w at sphere points.  Power weights with negative exponent are evaluated
    at distance at least 1e-8 from the pole (see ``POLE_FLOOR``)."""
    coords = xi.coords if isinstance(xi, SpherePoint) else np.asarray(xi, dtype=complex)
    v = w(np.atleast_2d(coords))
    if not np.all(v > 0):
        raise ValueError("weight is not strictly positive at the given points")
    return float(v[0]) if np.ndim(coords) == 1 else v


def tilde_extension(w: SphereFunction, z, quad: QuadratureSpec) -> float | np.ndarray:
    """Poisson-Szegő extension of a weight; zonal rule on the pole line when
    possible (unless Monte Carlo is requested), Mobius sampling otherwise."""
    coords = z.coords if isinstance(z, BallPoint) else np.asarray(z, dtype=complex)
    batch = np.atleast_2d(coords)
    if isinstance(w, Constant):
        v = np.full(batch.shape[0], w.value)
    elif quad.method != "monte-carlo" and _on_ray(w, batch):
        v = zonal_extension(w, batch)
    else:
        v = mc_extension(w, batch, quad, "mobius")[0]
    return float(v[0]) if np.ndim(coords) == 1 else v


def _on_ray(w, z, tol=1e-12) -> bool:
    if not w.is_zonal:
        return False
    c = z @ np.conj(w.pole.coords)
    return bool(np.all(np.abs(np.sum(np.abs(z) ** 2, axis=-1) - np.abs(c) ** 2) <= tol))


def power_a2_flag(alpha: float, n: int) -> bool:
    """True when a power weight is flagged as outside the invariant class by
    the stated criterion |alpha| < n - 1 (see the README for the caveat)."""
    return not abs(alpha) < n - 1


# -- cap averages ----------------------------------------------------------------------

def _pole_cap_integrals(w: SphereFunction, rho_max: float) -> tuple[float, float, float]:
    """(sigma, int w, int 1/w) over {|1 - <xi, pole>| < rho_max}, zonal rule."""
    n = w.n
    sig = zonal_integral(lambda lam: np.ones(np.shape(lam)), n, rho_max, peak_scale=rho_max)

    def integral(f):
        tot = 0.0
        for t in f.zonal_terms():
            tot += t.coefficient * zonal_integral(t.profile, n, min(rho_max, t.rho_max), t.pole_exponent,
                                                  peak_scale=rho_max)
        return tot

    return sig, integral(w), integral(w.reciprocal())


def _pole_centred(w, cap: Cap) -> bool:
    return w.is_zonal and w.reciprocal().is_zonal and np.allclose(cap.center.coords, w.pole.coords)


def cap_averages(w: SphereFunction, caps: list[Cap], count: int, rng: np.random.Generator):
    """Self-normalised averages of w and 1/w over caps, with inside counts."""
    centers = np.array([c.center.coords for c in caps])
    radii = np.array([c.radius for c in caps])
    pts, cw = cap_design(centers, radii, count, rng)
    n = centers.shape[1]
    wv = w(pts.reshape(-1, n)).reshape(cw.shape)
    tot = cw.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        aw = np.sum(cw * wv, axis=1) / tot
        ainv = np.sum(cw / wv, axis=1) / tot
    return aw, ainv, np.count_nonzero(cw, axis=1)


def _cap_product(w, cap: Cap, quad: QuadratureSpec, count: int, rng) -> float:
    if _pole_centred(w, cap):
        sig, iw, iinv = _pole_cap_integrals(w, cap.radius ** 2)
        return iw * iinv / sig ** 2
    aw, ainv, _ = cap_averages(w, [cap], count, rng)
    return float(aw[0] * ainv[0])


def _offset_center(pole: np.ndarray, dist: float) -> np.ndarray:
    """A sphere point at |1 - <xi, pole>| = dist (real lambda)."""
    lam = 1.0 - dist
    n = pole.size
    e = np.zeros(n, dtype=complex)
    e[int(np.argmin(np.abs(pole)))] = 1.0
    e -= np.vdot(pole, e) * pole
    e /= np.linalg.norm(e)
    return lam * pole + math.sqrt(max(1.0 - lam * lam, 0.0)) * e


def classical_a2(w: SphereFunction, search: CapSearch = CapSearch(), quad: QuadratureSpec = QuadratureSpec()) -> CharacteristicEstimate:
    """Lower estimate of Q_2(w) = sup over caps of <w>_B <1/w>_B."""
    if isinstance(w, Constant):
        return CharacteristicEstimate(1.0, Cap(SpherePoint.basis(w.n, 0), SQRT2), 0)
    n = w.n
    radii = search.radii()
    rng = chunk_rng(quad.seed, 0xCA9)
    best, witness, skipped, budget = 1.0, None, 0, 0
    zonal = w.is_zonal and w.reciprocal().is_zonal
    if zonal:
        pole = w.pole.coords
        for d in radii:
            sig, iw, iinv = _pole_cap_integrals(w, d * d)
            v = iw * iinv / sig ** 2
            budget += 1
            if v > best:
                best, witness = v, Cap(w.pole, float(d))
    caps = [Cap(SpherePoint(c), float(d)) for c in sphere_net(search.centers, n) for d in radii]
    if zonal and n >= 2:
        caps += [Cap(SpherePoint(_offset_center(pole, k * d * d)), float(d)) for d in radii[1:] for k in search.offsets]
    for i in range(0, len(caps), 64):
        block = caps[i:i + 64]
        aw, ainv, inside = cap_averages(w, block, search.cap_samples, rng)
        budget += len(block) * search.cap_samples
        for cap, a, b, k in zip(block, aw, ainv, inside):
            if k < 16:
                skipped += 1
                continue
            if a * b > best:
                best, witness = float(a * b), cap
    return CharacteristicEstimate(float(best), witness, budget, {"skipped_caps": skipped})


def invariant_a2(w: SphereFunction, search: BallSearch = BallSearch(), quad: QuadratureSpec = QuadratureSpec()) -> CharacteristicEstimate:
    """Lower estimate of Q~_2(w) = sup_z w~(z) (1/w)~(z).

    For zonal weights the estimate comes from the ray toward the pole, searched
    with the zonal rule (grid plus a bounded refinement in log(1 - r)); the
    global grid of Mobius-sampled extensions is then only a cross-check,
    reported with its standard errors.  Other weights use the grid alone.
    """
    if isinstance(w, Constant):
        return CharacteristicEstimate(1.0, BallPoint(np.zeros(w.n, dtype=complex)), 0)
    n = w.n
    inv = w.reciprocal()
    eps = quad.epsilon
    radii = search.radii(eps)
    details = {}
    best, witness, budget = 1.0, None, 0
    if search.ray and w.is_zonal and inv.is_zonal:
        pole = w.pole.coords

        def prod(r):
            z = (r * pole)[None, :]
            return float(zonal_extension(w, z)[0] * zonal_extension(inv, z)[0])

        vals = np.array([prod(r) for r in radii])
        budget += radii.size
        k = int(np.argmax(vals))
        r_best, v_best = radii[k], vals[k]
        lo = radii[max(k - 1, 0)]
        hi = radii[min(k + 1, radii.size - 1)]
        if hi > lo:
            t = lambda s: 1.0 - math.exp(s)
            res = optimize.minimize_scalar(lambda s: -prod(t(s)), bounds=(math.log(1 - hi), math.log(1 - lo) if lo < 1 else 0.0),
                                           method="bounded", options={"xatol": 1e-3})
            budget += int(res.nfev)
            if -res.fun > v_best:
                r_best, v_best = t(res.x), -res.fun
        details["ray_max"] = float(v_best)
        details["ray_argmax_r"] = float(r_best)
        best, witness = float(v_best), BallPoint(r_best * pole)
    if search.ray and isinstance(w, Pullback) and w.inner.is_zonal and w.inner.pole is not None:
        # phi_a carries the inner weight's ray to the curve where the pulled-back sup lives
        curve = mobius_transform(w.a, radii[:, None] * w.inner.pole.coords[None, :])
        a, _, _ = mc_extension(w, curve, quad, "mobius")
        b, _, _ = mc_extension(inv, curve, quad, "mobius")
        k = int(np.argmax(a * b))
        budget += curve.shape[0] * 4 * quad.inner_samples
        details["image_ray_max"] = float(a[k] * b[k])
        best, witness = float(a[k] * b[k]), BallPoint(curve[k])
    dirs = sphere_net(search.directions, n, include=w.pole.coords if w.pole is not None else None)
    pts = (radii[1:, None, None] * dirs[None, :, :]).reshape(-1, n)
    a, sa, _ = mc_extension(w, pts, quad, "mobius")
    b, sb, _ = mc_extension(inv, pts, quad, "mobius")
    prods = a * b
    se = np.hypot(a * sb, b * sa)
    budget += pts.shape[0] * 4 * quad.inner_samples
    k = int(np.argmax(prods))
    details["grid_max"] = float(prods[k])
    details["grid_se"] = float(se[k])
    details["grid_min"] = float(prods.min())
    details["grid_argmax"] = pts[k].tolist()
    if "ray_max" in details:
        # the grid is a cross-check of the ray search, not part of the estimate
        details["grid_excess_sigma"] = float(np.max((prods - details["ray_max"]) / np.maximum(se, 1e-300)))
    elif prods[k] > best:
        best, witness = float(prods[k]), BallPoint(pts[k])
    return CharacteristicEstimate(best, witness, budget, details)


# -- comparisons ------------------------------------------------------------------------

def cap_average_vs_extension(w: SphereFunction, cap: Cap, quad: QuadratureSpec = QuadratureSpec(), count: int = 1 << 16) -> float:
    """(average of w over the cap) / w~(z_cap), z_cap the point attached to the cap."""
    z = point_for_cap(cap)
    if _pole_centred(w, cap):
        sig, iw, _ = _pole_cap_integrals(w, cap.radius ** 2)
        avg = iw / sig
    else:
        aw, _, _ = cap_averages(w, [cap], count, chunk_rng(quad.seed, 0xA76))
        avg = float(aw[0])
    return avg / tilde_extension(w, z, quad)


@dataclass(frozen=True)
class Slack:
    value: float
    std_error: float
    q2_used: float


def better_than_doubling_check(w: SphereFunction, inner: Cap, outer: Cap, quad: QuadratureSpec = QuadratureSpec(),
                               q2: float | None = None, count: int = 1 << 14) -> Slack:
    """RHS - LHS of w(P) <= (1 - (1 - sigma(P)/sigma(Q))^2 / Q_2) w(Q).

    Q_2 is taken as max(q2, characteristic of the outer cap): the supremum
    dominates every cap, and the outer cap's own characteristic already
    makes the inequality hold (Cauchy-Schwarz on Q minus P).
    """
    if not np.allclose(inner.center.coords, outer.center.coords) or inner.radius > outer.radius:
        raise ValueError("inner cap must be concentric with and no larger than the outer cap")
    n = w.n
    ratio = cap_measure(inner.radius, n) / cap_measure(outer.radius, n)
    if _pole_centred(w, outer):
        sq, wq, wiq = _pole_cap_integrals(w, outer.radius ** 2)
        _, wp, _ = _pole_cap_integrals(w, inner.radius ** 2)
        q = max(q2 or 1.0, wq * wiq / sq ** 2)
        return Slack(float((1.0 - (1.0 - ratio) ** 2 / q) * wq - wp), 0.0, q)
    pts, cw = cap_design(outer.center.coords, outer.radius, count, chunk_rng(quad.seed, 0xB7D))
    pts, cw = pts[0], cw[0]
    wv = w(pts)
    d = np.abs(1.0 - pts @ np.conj(inner.center.coords))
    in_p = d < inner.radius ** 2
    sq = cap_measure(outer.radius, n)
    a_outer = (np.sum(cw * wv) / cw.sum()) * (np.sum(cw / wv) / cw.sum())
    q = max(q2 or 1.0, float(a_outer))
    coef = 1.0 - (1.0 - ratio) ** 2 / q
    terms = count * cw * wv * (coef - in_p)
    return Slack(float(terms.mean()), float(terms.std() / math.sqrt(count)), q)


def mobius_pullback_weight(w: SphereFunction, a) -> SphereFunction:
    """xi -> w(phi_a(xi)); phi_a extends continuously to the sphere."""
    coords = a.coords if isinstance(a, BallPoint) else np.asarray(a, dtype=complex)
    if not np.linalg.norm(coords) < 1:
        raise ValueError("Mobius parameter must lie in the open ball")
    return Pullback(w, coords)


__all__ = [
    "BallSearch",
    "CapSearch",
    "CharacteristicEstimate",
    "Slack",
    "better_than_doubling_check",
    "cap_average_vs_extension",
    "cap_averages",
    "classical_a2",
    "evaluate_weight",
    "invariant_a2",
    "mobius_pullback_weight",
    "power_a2_flag",
    "sphere_net",
    "tilde_extension",
]
