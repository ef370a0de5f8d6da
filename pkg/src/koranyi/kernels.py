"""Bergman and Poisson-Szegő kernels and the invariant Laplacian."""

from __future__ import annotations

import math

import numpy as np

from .geometry import (
    Cap,
    GeometryError,
    _coords,
    bergman_metric_inverse,
    hermitian_inner,
    in_cap,
)

H_FD = np.finfo(float).eps ** 0.25


def bergman_kernel(z, w):
    zc, wc = _coords(z), _coords(w)
    n = zc.shape[-1]
    return math.factorial(n) / math.pi ** n / (1.0 - hermitian_inner(zc, wc)) ** (n + 1)


def poisson_szego(z, zeta):
    """P(z, zeta) = (1-|z|^2)^n / |1 - <z, zeta>|^(2n); broadcasts."""
    zc, xc = _coords(z), _coords(zeta)
    n = zc.shape[-1]
    s = 1.0 - np.sum(np.abs(zc) ** 2, axis=-1)
    return (s / np.abs(1.0 - hermitian_inner(zc, xc)) ** 2) ** n


def poisson_szego_grad(z, zeta):
    """Holomorphic derivatives d/dz_i P(z, zeta), shape (..., n).

    d_i P = n P [conj(zeta_i)/(1 - <z,zeta>) - conj(z_i)/(1 - |z|^2)]
    """
    zc, xc = _coords(z), _coords(zeta)
    n = zc.shape[-1]
    p = poisson_szego(zc, xc)[..., None]
    s = 1.0 - np.sum(np.abs(zc) ** 2, axis=-1)[..., None]
    q = (1.0 - hermitian_inner(zc, xc))[..., None]
    return n * p * (np.conj(xc) / q - np.conj(zc) / s)


def poisson_bounds_check(z, zeta, k: int, base_cap: Cap) -> float | np.ndarray:
    """P(z, zeta) / [2^(-2nk) ((1+r)/(1-r))^n] for zeta in the k-th dyadic annulus.

    ``z`` must be of the form (r, 0, ..., 0) up to the rotation taking the cap
    centre to e_1, i.e. a non-negative multiple of ``base_cap.center``.  The
    k-th annulus is 2^k Q minus 2^(k-1) Q, where cQ has c^n times the measure
    (c^(1/2) times the radius); k = 0 is Q itself.
    """
    zc = _coords(z)
    n = zc.size
    c = base_cap.center.coords
    r = float(np.linalg.norm(zc))
    if r > 0 and abs(abs(hermitian_inner(zc, c)) - r) > 1e-12:
        raise GeometryError("z must lie on the ray through the cap centre")
    outer = base_cap.dilate(2.0 ** (k / 2.0))
    inside = in_cap(zeta, outer)
    if k > 0:
        inside = inside & ~in_cap(zeta, base_cap.dilate(2.0 ** ((k - 1) / 2.0)))
    if not np.all(inside):
        raise GeometryError(f"sample not in annulus k={k}")
    bound = 2.0 ** (-2 * n * k) * ((1.0 + r) / (1.0 - r)) ** n
    return poisson_szego(zc, zeta) / bound


def _derivs(f, r, h):
    f0, fp, fm = f(r), f(r + h), f(r - h)
    return (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / (h * h)


def laplacian_radial(f, r, n: int, fprime=None, fsecond=None):
    """Invariant Laplacian of the radial function z -> f(|z|).

    Derivatives are taken from ``fprime``/``fsecond`` when supplied, else by
    central differences.  At r = 0 the term (2n - 1 - r^2) f'(r)/r tends to
    (2n - 1) f''(0) for smooth profiles, giving 2n f''(0) / (n + 1).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(r >= 1):
        raise ValueError("laplacian_radial needs 0 <= r < 1")
    h = H_FD
    if fprime is None or fsecond is None:
        d1, d2 = _derivs(f, np.maximum(r, h), h)
        # symmetric stencil about 0 for the second derivative at the origin
        d2_0 = (f(np.full_like(r, h)) - 2 * f(np.zeros_like(r)) + f(np.full_like(r, h))) / (h * h)
        fp = fprime(r) if fprime is not None else d1
        fpp = fsecond(r) if fsecond is not None else np.where(r == 0, d2_0, d2)
    else:
        fp, fpp = fprime(r), fsecond(r)
    s = 1.0 - r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        first = np.where(r > 0, (2 * n - r * r - 1) * (fp / np.where(r > 0, r, 1.0)), (2 * n - 1) * fpp)
    out = s / (n + 1) * (s * fpp + first)
    return out if out.ndim else float(out)


def complex_hessian_fd(u, z, h: float | None = None) -> np.ndarray:
    """Mixed Wirtinger derivatives d_j dbar_i u at z, shape (n, n) indexed [i, j].

    ``u`` maps complex arrays of shape (m, n) to real arrays of shape (m,).
    The real 2n x 2n Hessian is built from central differences and combined as
    d_j dbar_i u = (u_{x_j x_i} + u_{y_j y_i} + i (u_{x_j y_i} - u_{y_j x_i})) / 4.
    """
    zc = _coords(z).reshape(-1)
    n = zc.size
    r = float(np.linalg.norm(zc))
    if h is None:
        h = H_FD * max(1.0, r)
        h = min(h, (1.0 - r) / 8.0)
    if h <= 1e-12:
        raise GeometryError("finite-difference step underflow near the boundary")
    x0 = np.empty(2 * n)
    x0[0::2], x0[1::2] = zc.real, zc.imag
    m = 2 * n
    eye = np.eye(m) * h
    pts = [x0]
    for a in range(m):
        pts += [x0 + eye[a], x0 - eye[a]]
    for a in range(m):
        for b in range(a + 1, m):
            pts += [x0 + eye[a] + eye[b], x0 + eye[a] - eye[b], x0 - eye[a] + eye[b], x0 - eye[a] - eye[b]]
    pts = np.array(pts)
    vals = np.asarray(u(pts[:, 0::2] + 1j * pts[:, 1::2]), dtype=float)
    f0 = vals[0]
    H = np.empty((m, m))
    for a in range(m):
        H[a, a] = (vals[1 + 2 * a] - 2 * f0 + vals[2 + 2 * a]) / (h * h)
    idx = 1 + 2 * m
    for a in range(m):
        for b in range(a + 1, m):
            pp, pm, mp, mm = vals[idx: idx + 4]
            H[a, b] = H[b, a] = (pp - pm - mp + mm) / (4 * h * h)
            idx += 4
    hx = H[0::2, 0::2]
    hy = H[1::2, 1::2]
    hxy = H[0::2, 1::2]  # [i, j] = u_{x_i y_j}
    # entry [i, j] = d_j dbar_i u
    return 0.25 * (hx + hy + 1j * (hxy.T - hxy))


def invariant_laplacian_fd(u, z, h: float | None = None, richardson: bool | None = None) -> float:
    """4 sum_ij g^{ij} d_j dbar_i u at z by finite differences.

    Richardson extrapolation over steps (h, h/2) is applied by default when
    |z| > 0.8, where the stencil error grows with the boundary blow-up.
    """
    zc = _coords(z).reshape(-1)
    ginv = bergman_metric_inverse(zc)
    r = float(np.linalg.norm(zc))
    if richardson is None:
        richardson = r > 0.8

    def lap(step):
        m = complex_hessian_fd(u, zc, step)
        return 4.0 * float(np.real(np.sum(ginv * m)))

    if h is None:
        h = min(H_FD * max(1.0, r), (1.0 - r) / 8.0)
    if not richardson:
        return lap(h)
    a, b = lap(h), lap(h / 2)
    return (4.0 * b - a) / 3.0
