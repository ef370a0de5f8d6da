"""Estimators for Poisson-Szegő extensions and their derivatives.

Three routes:

* ``zonal``  -- z on the complex line through the pole of a zonal function;
  the kernel is then zonal too and the deterministic zonal rule applies.
* ``mobius`` -- P(z, .) d sigma is the image of sigma under phi_z, so
  f~(z) = E f(phi_z(U)) with U uniform; draws concentrate where the kernel
  does.  Antithetic pairs (U, -U) are used.
* ``kernel`` -- plain average of P(z, U) f(U).  Each term is M-harmonic in z,
  so the estimate is an exactly M-harmonic function of z (useful for
  finite-difference checks), but the variance grows like (1-|z|)^(-n).
"""

from __future__ import annotations

import numpy as np

from .functions import SphereFunction
from .geometry import hermitian_inner, mobius_transform
from .kernels import poisson_szego, poisson_szego_grad
from .quadrature import QuadratureSpec, sample_sphere, zonal_integral

BLOCK = 1 << 20


def _as_batch(z):
    z = np.asarray(z, dtype=complex)
    return z.reshape(-1, z.shape[-1]), z.shape[:-1]


def inner_points(n: int, count: int, seed: int) -> np.ndarray:
    u = sample_sphere(count, n, seed ^ 0x5EED)
    return np.concatenate([u, -u])


def on_pole_line(f: SphereFunction, z, tol: float = 1e-12) -> bool:
    if f.zonal_terms() is None:
        return False
    zb, _ = _as_batch(z)
    c = hermitian_inner(zb, f.pole.coords)
    return bool(np.all(np.abs(np.sum(np.abs(zb) ** 2, axis=-1) - np.abs(c) ** 2) <= tol))


def zonal_extension(f: SphereFunction, z) -> np.ndarray:
    """f~(z) for z = c * pole, by the zonal rule (n >= 1)."""
    terms = f.zonal_terms()
    if terms is None:
        raise ValueError("zonal extension needs a zonal function")
    zb, shape = _as_batch(z)
    n = f.n
    out = np.empty(zb.shape[0])
    for i, c in enumerate(hermitian_inner(zb, f.pole.coords)):
        s = 1.0 - abs(c) ** 2
        kern = lambda lam, c=c, s=s: (s / np.abs(1.0 - c * np.conj(lam)) ** 2) ** n
        out[i] = sum(
            t.coefficient * zonal_integral(lambda lam, t=t: t.profile(lam) * kern(lam), n, t.rho_max,
                                           t.pole_exponent, peak_scale=max(1.0 - abs(c), 1e-300))
            for t in terms
        )
    return out.reshape(shape)


def _blocks(N, per_point):
    b = max(1, BLOCK // max(per_point, 1))
    for i in range(0, N, b):
        yield slice(i, min(N, i + b))


def _fresh_points(rng: np.random.Generator, B: int, half: int, n: int) -> np.ndarray:
    g = rng.standard_normal((B, half, n)) + 1j * rng.standard_normal((B, half, n))
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    return np.concatenate([g, -g], axis=1)


def mc_extension(f: SphereFunction, z, quad: QuadratureSpec, method: str = "mobius", gradient: str | None = None,
                 rng: np.random.Generator | None = None):
    """Monte Carlo extension at a batch of points.

    Returns ``(values, std_errors, grad)`` where ``grad`` is None or the
    holomorphic derivatives (N, n) of f~ (``gradient="contraction"``) or of
    f~ o phi_z at 0 (``gradient="mobius-pullback"``, only with method mobius).

    Without ``rng`` every z uses one inner point set fixed by ``quad.seed``, so
    the estimate is a deterministic function of z.  With ``rng`` each z gets
    fresh inner points and ``grad`` has shape (2, N, n): two independent
    half-sample estimates, each centred with the other half's mean, whose
    product gives an unbiased |d f~|^2 (see ``grad_form``).
    """
    zb, shape = _as_batch(z)
    N, n = zb.shape
    half = quad.inner_samples
    M = 2 * half
    fixed = None if rng is not None else inner_points(n, half, quad.seed)
    vals = np.empty(N)
    ses = np.empty(N)
    split = rng is not None and gradient is not None
    if gradient:
        grads = np.empty((2, N, n) if split else (N, n), dtype=complex)
    for sl in _blocks(N, M * n):
        zz = zb[sl]
        B = zz.shape[0]
        u = fixed[None] if fixed is not None else _fresh_points(rng, B, half, n)
        if method == "mobius":
            zeta = mobius_transform(zz[:, None, :], u)
            fv = np.asarray(f(zeta.reshape(-1, n)), dtype=float).reshape(B, M)
        elif method == "kernel":
            fu = np.asarray(f(u.reshape(-1, n)), dtype=float).reshape(u.shape[:2])
            fv = poisson_szego(zz[:, None, :], u) * fu
        else:
            raise ValueError(f"unknown extension method {method!r}")
        mean = fv.mean(axis=1)
        vals[sl] = mean
        ses[sl] = fv.std(axis=1) / np.sqrt(M)
        if not gradient:
            continue
        if method == "kernel":
            if gradient != "contraction":
                raise ValueError("the kernel route only supports the contraction gradient")
            terms = poisson_szego_grad(zz[:, None, :], u) * fu[..., None]
            cen = None
        else:
            if gradient == "contraction":
                q = 1.0 - np.sum(zz[:, None, :] * np.conj(zeta), axis=-1)
                s = 1.0 - np.sum(np.abs(zz) ** 2, axis=-1)
                score = np.conj(zeta) / q[..., None] - (np.conj(zz) / s[:, None])[:, None, :]
            elif gradient == "mobius-pullback":
                score = np.broadcast_to(np.conj(u), (B, M, n))
            else:
                raise ValueError(f"unknown gradient method {gradient!r}")
            cen = fv
        if not split:
            if cen is None:
                grads[sl] = terms.mean(axis=1)
            else:
                grads[sl] = n * np.mean((cen - mean[:, None])[..., None] * score, axis=1)
            continue
        # halves interleave antithetic pairs: index j and j + half belong together
        idx_a = np.r_[0:half // 2, half:half + half // 2]
        idx_b = np.r_[half // 2:half, half + half // 2:M]
        for k, (ia, ib) in enumerate(((idx_a, idx_b), (idx_b, idx_a))):
            if cen is None:
                grads[k, sl] = terms[:, ia].mean(axis=1)
            else:
                other = cen[:, ib].mean(axis=1)
                grads[k, sl] = n * np.mean((cen[:, ia] - other[:, None])[..., None] * score[:, ia], axis=1)
    if not gradient:
        return vals.reshape(shape), ses.reshape(shape), None
    gshape = ((2,) if split else ()) + shape + (n,)
    return vals.reshape(shape), ses.reshape(shape), grads.reshape(gshape)


def grad_form(z, d1, d2, method: str = "contraction") -> np.ndarray:
    """Real bilinear form behind |grad~ u|^2, evaluated on two derivative estimates."""
    d1 = np.asarray(d1, dtype=complex)
    d2 = np.asarray(d2, dtype=complex)
    dot = np.real(np.sum(d1 * np.conj(d2), axis=-1))
    if method == "mobius-pullback":
        return 4.0 * dot
    z = np.asarray(z, dtype=complex)
    n = z.shape[-1]
    s = 1.0 - np.sum(np.abs(z) ** 2, axis=-1)
    cross = np.real(np.sum(z * d1, axis=-1) * np.conj(np.sum(z * d2, axis=-1)))
    return 4.0 * s / (n + 1) * (dot - cross)


def grad_sq_from_derivs(z, d, method: str = "contraction") -> np.ndarray:
    """|grad~ u|^2 from holomorphic derivatives of a real function.

    contraction: 4 sum g^{ij} dbar_i u d_j u = 4 (1-|z|^2)/(n+1) (|du|^2 - |<du, conj z>|^2)
    mobius-pullback: Euclidean |grad (u o phi_z)(0)|^2 = 4 |d(u o phi_z)(0)|^2
    """
    return grad_form(z, d, d, method)


def extension(f: SphereFunction, z, quad: QuadratureSpec, mc_route: str = "mobius") -> tuple[np.ndarray, np.ndarray]:
    """f~(z) with standard errors, choosing the zonal rule when it applies."""
    if quad.method == "zonal-2d" or (quad.method != "monte-carlo" and on_pole_line(f, z)):
        if not on_pole_line(f, z):
            raise ValueError("zonal-2d extension needs a zonal function and z on its pole line")
        v = zonal_extension(f, z)
        return v, np.zeros_like(v)
    v, se, _ = mc_extension(f, z, quad, mc_route)
    return v, se

