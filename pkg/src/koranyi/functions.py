"""Functions on the sphere used as weights and as boundary data.

Every function evaluates on complex arrays of shape (m, n).  Functions that
depend on xi only through lambda = <xi, pole> also expose ``zonal_terms``:
a list of (coefficient, rho_max, profile, pole_exponent) with

    f(xi) = sum coefficient * profile(lambda) * [|1 - lambda| < rho_max],

which is what the zonal quadrature rule consumes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .geometry import Cap, SpherePoint, hermitian_inner, mobius_transform

POLE_FLOOR = 1e-16  # |1 - lambda| floor: distance 1e-8 from the pole


class FunctionSpecError(ValueError):
    pass


@dataclass(frozen=True)
class ZonalTerm:
    coefficient: float
    rho_max: float
    profile: Callable
    pole_exponent: float = 0.0


class SphereFunction:
    kind = "abstract"
    n: int
    pole: SpherePoint | None = None

    def __call__(self, zeta) -> np.ndarray:
        raise NotImplementedError

    def zonal_terms(self) -> list[ZonalTerm] | None:
        return None

    @property
    def is_zonal(self) -> bool:
        return self.zonal_terms() is not None

    def exact_extension(self, z) -> np.ndarray | None:
        """Closed-form Poisson-Szegő extension, when one is known."""
        return None

    def reciprocal(self) -> "SphereFunction":
        return Reciprocal(self)

    def to_dict(self) -> dict:
        raise FunctionSpecError(f"{self.kind} functions are not serialisable")

    def _lam(self, zeta):
        return hermitian_inner(np.asarray(zeta, dtype=complex), self.pole.coords)


def _pole(n, pole):
    if pole is None:
        return SpherePoint.basis(n, 0)
    if isinstance(pole, SpherePoint):
        return pole
    return SpherePoint(np.asarray(pole, dtype=complex))


def _pole_list(p: SpherePoint):
    return [[float(c.real), float(c.imag)] for c in p.coords]


class Constant(SphereFunction):
    kind = "constant"

    def __init__(self, n: int, value: float = 1.0):
        self.n, self.value = n, float(value)
        self.pole = SpherePoint.basis(n, 0)

    def __call__(self, zeta):
        return np.full(np.shape(zeta)[:-1], self.value)

    def zonal_terms(self):
        v = self.value
        return [ZonalTerm(1.0, 2.0, lambda lam: np.full(np.shape(lam), v))]

    def exact_extension(self, z):
        return np.full(np.shape(z)[:-1], self.value)

    def reciprocal(self):
        return Constant(self.n, 1.0 / self.value)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "value": self.value}


class Power(SphereFunction):
    """|1 - <xi, pole>|^exponent; the power weight omega_alpha has exponent alpha
    and the sharpness test function f_alpha has exponent -alpha."""

    kind = "power"

    def __init__(self, n: int, exponent: float, pole=None):
        self.n, self.exponent = n, float(exponent)
        self.pole = _pole(n, pole)

    def __call__(self, zeta):
        d = np.maximum(np.abs(1.0 - self._lam(zeta)), POLE_FLOOR)
        return d ** self.exponent

    def zonal_terms(self):
        e = self.exponent
        return [ZonalTerm(1.0, 2.0, lambda lam: np.abs(1.0 - lam) ** e, e)]

    def reciprocal(self):
        return Power(self.n, -self.exponent, self.pole)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "alpha": self.exponent, "pole": _pole_list(self.pole)}


class RePower(SphereFunction):
    """Re(<xi, pole>^k): zonal and pluriharmonic, so its extension is Re <z, pole>^k."""

    kind = "zonal-profile"

    def __init__(self, n: int, k: int = 1, pole=None):
        self.n, self.k = n, int(k)
        self.pole = _pole(n, pole)

    def __call__(self, zeta):
        return np.real(self._lam(zeta) ** self.k)

    def zonal_terms(self):
        k = self.k
        return [ZonalTerm(1.0, 2.0, lambda lam: np.real(lam ** k))]

    def exact_extension(self, z):
        return np.real(hermitian_inner(np.asarray(z, dtype=complex), self.pole.coords) ** self.k)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "profile": "re-power", "k": self.k, "pole": _pole_list(self.pole)}


class CoordinateRealPart(SphereFunction):
    """Re(c * zeta_k)."""

    kind = "coordinate-real-part"

    def __init__(self, n: int, index: int = 0, coefficient: complex = 1.0):
        if not 0 <= index < n:
            raise FunctionSpecError("coordinate index out of range")
        self.n, self.index, self.coefficient = n, int(index), complex(coefficient)
        self.pole = SpherePoint.basis(n, index)

    def __call__(self, zeta):
        return np.real(self.coefficient * np.asarray(zeta)[..., self.index])

    def zonal_terms(self):
        c = self.coefficient
        return [ZonalTerm(1.0, 2.0, lambda lam: np.real(c * lam))]

    def exact_extension(self, z):
        return np.real(self.coefficient * np.asarray(z)[..., self.index])

    def to_dict(self):
        c = self.coefficient
        return {"kind": self.kind, "n": self.n, "index": self.index, "coefficient": [c.real, c.imag]}


class HarmonicPoly(SphereFunction):
    """|zeta_k|^2 - 1/n, a bidegree (1,1) spherical harmonic.

    Its M-harmonic extension is F(1,1;n+2;|z|^2)/F(1,1;n+2;1) * (|z_k|^2 - |z|^2/n)
    with F(1,1;n+2;1) = (n+1)/n.
    """

    kind = "finite-spherical-poly"

    def __init__(self, n: int, index: int = 0):
        if n < 2:
            raise FunctionSpecError("|zeta_k|^2 - 1/n vanishes identically for n = 1")
        self.n, self.index = n, int(index)
        self.pole = SpherePoint.basis(n, index)

    def __call__(self, zeta):
        return np.abs(np.asarray(zeta)[..., self.index]) ** 2 - 1.0 / self.n

    def zonal_terms(self):
        n = self.n
        return [ZonalTerm(1.0, 2.0, lambda lam: np.abs(lam) ** 2 - 1.0 / n)]

    def exact_extension(self, z):
        z = np.asarray(z, dtype=complex)
        n = self.n
        t = np.sum(np.abs(z) ** 2, axis=-1)
        h = np.abs(z[..., self.index]) ** 2 - t / n
        return special.hyp2f1(1, 1, n + 2, t) * n / (n + 1) * h

    def to_dict(self):
        return {"kind": self.kind, "n": self.n, "index": self.index}


class CapStep(SphereFunction):
    """Piecewise-constant weight: the level of the smallest listed cap that
    contains xi, and ``base`` outside every cap."""

    kind = "cap-step"

    def __init__(self, n: int, pieces, base: float = 1.0):
        pieces = sorted(((c, float(v)) for c, v in pieces), key=lambda p: p[0].radius)
        if any(v <= 0 for _, v in pieces) or base <= 0:
            raise FunctionSpecError("cap-step levels must be positive")
        if any(c.n != n for c, _ in pieces):
            raise FunctionSpecError("cap dimension mismatch")
        self.n, self.pieces, self.base = n, pieces, float(base)
        self.pole = pieces[0][0].center if pieces else SpherePoint.basis(n, 0)

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=complex)
        out = np.full(zeta.shape[:-1], self.base)
        done = np.zeros(zeta.shape[:-1], dtype=bool)
        for cap, level in self.pieces:
            inside = ~done & (np.abs(1.0 - hermitian_inner(zeta, cap.center.coords)) < cap.radius ** 2)
            out[inside] = level
            done |= inside
        return out

    def _concentric(self):
        c = self.pole.coords
        return all(abs(abs(np.vdot(c, cap.center.coords)) - 1) < 1e-14 and np.allclose(cap.center.coords, c)
                   for cap, _ in self.pieces)

    def zonal_terms(self):
        if not self._concentric():
            return None
        levels = [v for _, v in self.pieces] + [self.base]
        terms = [ZonalTerm(self.base, 2.0, lambda lam: np.ones(np.shape(lam)))]
        for i, (cap, v) in enumerate(self.pieces):
            terms.append(ZonalTerm(v - levels[i + 1], cap.radius ** 2, lambda lam: np.ones(np.shape(lam))))
        return terms

    def reciprocal(self):
        return CapStep(self.n, [(c, 1.0 / v) for c, v in self.pieces], 1.0 / self.base)

    def to_dict(self):
        return {
            "kind": self.kind,
            "n": self.n,
            "base": self.base,
            "pieces": [{"center": _pole_list(c.center), "radius": c.radius, "level": v} for c, v in self.pieces],
        }


class ProductPerturbation(SphereFunction):
    """base(xi) * (1 + amplitude * Re xi_k), |amplitude| < 1."""

    kind = "product-perturbation"

    def __init__(self, base: SphereFunction, amplitude: float, index: int = 0):
        if not abs(amplitude) < 1:
            raise FunctionSpecError("perturbation amplitude must satisfy |amplitude| < 1")
        self.base, self.amplitude, self.index = base, float(amplitude), int(index)
        self.n, self.pole = base.n, base.pole

    def __call__(self, zeta):
        return self.base(zeta) * (1.0 + self.amplitude * np.real(np.asarray(zeta)[..., self.index]))

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "amplitude": self.amplitude, "index": self.index}


class Reciprocal(SphereFunction):
    kind = "reciprocal"

    def __init__(self, inner: SphereFunction):
        self.inner, self.n, self.pole = inner, inner.n, inner.pole

    def __call__(self, zeta):
        return 1.0 / self.inner(zeta)

    def reciprocal(self):
        return self.inner


class Pullback(SphereFunction):
    """xi -> f(phi_a(xi)) for the involutive automorphism phi_a."""

    kind = "mobius-pullback"

    def __init__(self, inner: SphereFunction, a):
        self.inner, self.a = inner, np.asarray(a, dtype=complex)
        self.n = inner.n
        # where the pulled-back function sees the inner pole
        self.pole = None if inner.pole is None else SpherePoint(mobius_transform(self.a, inner.pole.coords))

    def __call__(self, zeta):
        return self.inner(mobius_transform(self.a, np.asarray(zeta, dtype=complex)))

    def reciprocal(self):
        return Pullback(self.inner.reciprocal(), self.a)


class Sum(SphereFunction):
    """Linear combination of sphere functions (used to remove means)."""

    kind = "sum"

    def __init__(self, parts):
        self.parts = [(float(c), f) for c, f in parts]
        self.n = self.parts[0][1].n
        self.pole = self.parts[0][1].pole

    def __call__(self, zeta):
        return sum(c * f(zeta) for c, f in self.parts)

    def zonal_terms(self):
        out = []
        for c, f in self.parts:
            t = f.zonal_terms()
            if t is None or not np.allclose(f.pole.coords, self.pole.coords):
                return None
            out += [ZonalTerm(c * s.coefficient, s.rho_max, s.profile, s.pole_exponent) for s in t]
        return out

    def exact_extension(self, z):
        vals = [f.exact_extension(z) for _, f in self.parts]
        if any(v is None for v in vals):
            return None
        return sum(c * v for (c, _), v in zip(self.parts, vals))


def power_weight(n: int, alpha: float, pole=None) -> Power:
    return Power(n, alpha, pole)


def f_alpha(n: int, alpha: float, pole=None) -> Power:
    return Power(n, -alpha, pole)


def check_positive(f: SphereFunction, samples: int = 4096, seed: int = 12345) -> None:
    from .quadrature import sample_sphere

    vals = f(sample_sphere(samples, f.n, seed))
    if not np.all(vals > 0):
        raise FunctionSpecError(f"{f.kind} function is not strictly positive on the sphere")


def from_dict(d: dict) -> SphereFunction:
    """Inverse of ``to_dict``."""
    try:
        kind = d["kind"]
        if kind == "product-perturbation":
            return ProductPerturbation(from_dict(d["base"]), d["amplitude"], d.get("index", 0))
        n = int(d["n"])
        pole = None
        if "pole" in d:
            pole = np.array([complex(a, b) for a, b in d["pole"]])
        if kind == "constant":
            return Constant(n, d.get("value", 1.0))
        if kind == "power":
            return Power(n, d["alpha"], pole)
        if kind == "zonal-profile":
            if d.get("profile") != "re-power":
                raise FunctionSpecError(f"unknown zonal profile {d.get('profile')!r}; valid: re-power")
            return RePower(n, d.get("k", 1), pole)
        if kind == "coordinate-real-part":
            c = d.get("coefficient", [1.0, 0.0])
            return CoordinateRealPart(n, d.get("index", 0), complex(c[0], c[1]))
        if kind == "finite-spherical-poly":
            return HarmonicPoly(n, d.get("index", 0))
        if kind == "cap-step":
            pieces = [
                (Cap(SpherePoint(np.array([complex(a, b) for a, b in p["center"]])), p["radius"]), p["level"])
                for p in d["pieces"]
            ]
            return CapStep(n, pieces, d.get("base", 1.0))
    except KeyError as exc:
        raise FunctionSpecError(f"function spec {d!r} is missing field {exc}") from None
    kinds = "constant, power, zonal-profile, coordinate-real-part, finite-spherical-poly, cap-step, product-perturbation"
    raise FunctionSpecError(f"unknown function kind {d.get('kind')!r}; valid: {kinds}")

