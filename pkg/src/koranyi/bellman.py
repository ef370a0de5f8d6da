"""The Bellman function B(X, x, w, v; Q) and numerical checks of its size and
concavity on the domain {x^2 < X w, 1 <= w v <= Q}.

    B = (1 + 1/Q) X - x^2/(Q w) - Q^2 x^2 / D,
    D = Q^2 w + (4Q^2 + 1) w - w^2 v - 4Q^2/v,

so B = B1/Q + B2 with B1 = X - x^2/w and B2 = B1(X, x, w') where
w' = D/Q^2.  Everything here is vectorised over points; ``BellmanPoint``
is the validated scalar view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COORDS = ("X", "x", "w", "v")
STRATA = ("interior", "near-x2=Xw", "near-wv=1", "near-wv=Q")
H_FD = np.finfo(float).eps ** 0.25
X_MARGIN = 1e-3
WV_MARGIN = 1e-6


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class BellmanPoint:
    X: float
    x: float
    w: float
    v: float
    Q: float

    def __post_init__(self):
        if not self.Q >= 1:
            raise DomainError("Q must be at least 1")
        if not (self.X > 0 and self.w > 0 and self.v > 0):
            raise DomainError("X, w and v must be positive")
        if not self.x * self.x < self.X * self.w:
            raise DomainError("need x^2 < X w")
        if not 1.0 <= self.w * self.v <= self.Q:
            raise DomainError("need 1 <= w v <= Q")

    def array(self) -> np.ndarray:
        return np.array([self.X, self.x, self.w, self.v])


def _unpack(p):
    if isinstance(p, BellmanPoint):
        return p.X, p.x, p.w, p.v, p.Q
    raise TypeError("expected a BellmanPoint")


def denominator(w, v, Q):
    return w * (5 * Q * Q + 1) - w * w * v - 4 * Q * Q / v


def bellman_b1(X, x, w):
    return X - x * x / w


def bellman_array(X, x, w, v, Q):
    D = denominator(w, v, Q)
    if np.any(D <= 0):
        raise DomainError("denominator is not positive: point outside the validated domain")
    return (1 + 1 / Q) * X - x * x / (Q * w) - Q * Q * x * x / D


def bellman_value(p: BellmanPoint) -> float:
    return float(bellman_array(*_unpack(p)))


# -- sampling ---------------------------------------------------------------------

@dataclass(frozen=True)
class DomainSample:
    Q: float
    X: np.ndarray
    x: np.ndarray
    w: np.ndarray
    v: np.ndarray
    stratum: np.ndarray  # index into STRATA

    def __len__(self):
        return self.X.size

    def points(self):
        for i in range(len(self)):
            yield BellmanPoint(float(self.X[i]), float(self.x[i]), float(self.w[i]), float(self.v[i]), self.Q)

    def array(self) -> np.ndarray:
        return np.stack([self.X, self.x, self.w, self.v], axis=1)


def domain_sample(Q: float, count: int, seed: int) -> DomainSample:
    """Points strictly inside the domain, four equal strata.

    X, w are log-uniform on [1e-3, 1e3]; x^2 <= (1 - 1e-3) X w with a random
    sign; wv in [1 + 1e-6, Q - 1e-6 (Q - 1)].  The near-boundary strata put
    x^2/(Xw) or wv within a relative 1e-3 band of the corresponding edge.
    """
    if not Q >= 1:
        raise DomainError("Q must be at least 1")
    rng = np.random.default_rng([int(seed), int(round(Q * 1e6)) & 0xFFFFFFFF])
    lab = np.arange(count) % len(STRATA)
    X = 10.0 ** rng.uniform(-3, 3, count)
    w = 10.0 ** rng.uniform(-3, 3, count)
    t_lo, t_hi = 1.0 + WV_MARGIN, Q - WV_MARGIN * (Q - 1)
    if t_hi < t_lo:
        t_lo = t_hi = 1.0
    band = 1e-3 * (t_hi - t_lo)
    t = rng.uniform(t_lo, t_hi, count)
    t = np.where(lab == 2, t_lo + rng.uniform(0, band, count), t)
    t = np.where(lab == 3, t_hi - rng.uniform(0, band, count), t)
    smax = 1.0 - X_MARGIN
    s2 = rng.uniform(0, smax, count)
    s2 = np.where(lab == 1, smax - rng.uniform(0, 1e-3 * smax, count), s2)
    x = np.sqrt(s2 * X * w) * rng.choice([-1.0, 1.0], count)
    return DomainSample(float(Q), X, x, w, t / w, lab)


# -- pointwise identities ------------------------------------------------------

def key_inequality_check(w, v, Q):
    """(2Q - 1)^2 vw - (vw - 2Q)^2, nonnegative for 1 <= vw <= Q."""
    t = np.asarray(w) * np.asarray(v)
    return (2 * Q - 1) ** 2 * t - (t - 2 * Q) ** 2


def b1_b2_structure_check(X, x, w, v, Q):
    """Relative residuals of B2 = B1(X, x, w') and of w' - w computed two ways,
    plus w' itself.  B2 is evaluated as X - Q^2 x^2 / D."""
    D = denominator(w, v, Q)
    b2 = X - Q * Q * x * x / D
    shift_a = ((4 * Q * Q + 1) * w - w * w * v - 4 * Q * Q / v) / (Q * Q)
    w_prime = w + shift_a
    shift_b = D / (Q * Q) - w
    r1 = (b2 - bellman_b1(X, x, w_prime)) / np.maximum(np.abs(X), 1e-300)
    r2 = (shift_a - shift_b) / np.maximum(np.abs(w_prime), 1e-300)
    return r1, r2, w_prime


def decomposition_residual(X, x, w, v, Q):
    """(B - (B1/Q + B2)) / X."""
    D = denominator(w, v, Q)
    b = bellman_array(X, x, w, v, Q)
    return (b - (bellman_b1(X, x, w) / Q + X - Q * Q * x * x / D)) / X


# -- Hessians ------------------------------------------------------------------------

def hessian_analytic(X, x, w, v, Q) -> np.ndarray:
    """Hessian of B in (X, x, w, v), shape (..., 4, 4); B is affine in X."""
    X, x, w, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (X, x, w, v)))
    D = denominator(w, v, Q)
    Dw = 5 * Q * Q + 1 - 2 * w * v
    Dv = -w * w + 4 * Q * Q / (v * v)
    Dww = -2 * v
    Dwv = -2 * w
    Dvv = -8 * Q * Q / v ** 3
    H = np.zeros(X.shape + (4, 4))
    # phi = x^2 / w
    p_xx, p_xw, p_ww = 2 / w, -2 * x / w ** 2, 2 * x * x / w ** 3
    # psi = x^2 / D
    s_xx = 2 / D
    s_xw = -2 * x * Dw / D ** 2
    s_xv = -2 * x * Dv / D ** 2
    s_ww = x * x * (2 * Dw * Dw / D ** 3 - Dww / D ** 2)
    s_wv = x * x * (2 * Dw * Dv / D ** 3 - Dwv / D ** 2)
    s_vv = x * x * (2 * Dv * Dv / D ** 3 - Dvv / D ** 2)
    a, b = -1.0 / Q, -Q * Q
    H[..., 1, 1] = a * p_xx + b * s_xx
    H[..., 1, 2] = H[..., 2, 1] = a * p_xw + b * s_xw
    H[..., 1, 3] = H[..., 3, 1] = b * s_xv
    H[..., 2, 2] = a * p_ww + b * s_ww
    H[..., 2, 3] = H[..., 3, 2] = b * s_wv
    H[..., 3, 3] = b * s_vv
    return H


def coordinate_scales(X, x, w, v) -> np.ndarray:
    """Natural size of each coordinate: (X, sqrt(X w), w, v)."""
    X, x, w, v = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (X, x, w, v)))
    return np.stack([X, np.sqrt(X * w), w, v], axis=-1)


def hessian_fd(X, x, w, v, Q, h: float = H_FD) -> np.ndarray:
    """Central-difference Hessian, steps h times the coordinate scales.

    The stencil uses B's formula, which stays defined a little outside the
    domain (D > 0 and w > 0), so no extra margin is needed at the edges.
    """
    p = np.stack(np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (X, x, w, v))), axis=-1)
    step = h * coordinate_scales(*np.moveaxis(p, -1, 0))
    f = lambda q: bellman_array(q[..., 0], q[..., 1], q[..., 2], q[..., 3], Q)
    f0 = f(p)
    H = np.empty(p.shape[:-1] + (4, 4))
    for i in range(4):
        ei = np.zeros(4)
        ei[i] = 1
        di = step[..., i:i + 1] * ei
        H[..., i, i] = (f(p + di) - 2 * f0 + f(p - di)) / step[..., i] ** 2
        for j in range(i + 1, 4):
            ej = np.zeros(4)
            ej[j] = 1
            dj = step[..., j:j + 1] * ej
            val = (f(p + di + dj) - f(p + di - dj) - f(p - di + dj) + f(p - di - dj)) / (4 * step[..., i] * step[..., j])
            H[..., i, j] = H[..., j, i] = val
    return H


# -- concavity -----------------------------------------------------------------------------

def schur_margin(H, v, Q):
    """Exact inf over d with d_x != 0 of -d^T H d / ((v/Q^2) d_x^2).

    -H has a zero X row and column, so the infimum is the Schur complement of
    the (w, v) block in the (x, w, v) block, scaled by Q^2/v.
    """
    A = -H
    axx = A[..., 1, 1]
    b = A[..., 1, 2:4]
    C = A[..., 2:4, 2:4]
    det = C[..., 0, 0] * C[..., 1, 1] - C[..., 0, 1] * C[..., 1, 0]
    inv = np.stack([np.stack([C[..., 1, 1], -C[..., 0, 1]], -1), np.stack([-C[..., 1, 0], C[..., 0, 0]], -1)], -2)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = inv / det[..., None, None]
    # at x = 0 the (w, v) block vanishes with b; the pseudo-inverse gives the right limit
    bad = ~np.isfinite(inv).all(axis=(-2, -1)) | (det == 0)
    if np.any(bad):
        inv = np.where(bad[..., None, None], np.linalg.pinv(np.where(bad[..., None, None], C, 0.0)), inv)
    s = axx - np.einsum("...i,...ij,...j->...", b, inv, b)
    return Q * Q / v * s


def concavity_margin(p, H=None, directions: int = 64, seed: int = 0):
    """Directional checks of -d^2 B at one or many points.

    Returns a dict of arrays:
      ``pure``     min over scaled unit directions (64 random plus the 4 axes) of -d^T H d,
                   directions scaled by the coordinate sizes so values compare with |B|;
      ``sampled``  min over those directions with d_x != 0 of the ratio to (v/Q^2) d_x^2;
      ``exact``    the exact infimum of that ratio (Schur complement);
      ``eig_min``  smallest eigenvalue of the scaled -H;
      ``scale``    |B| + 1, the tolerance scale.
    """
    if isinstance(p, BellmanPoint):
        X, x, w, v, Q = (np.atleast_1d(t) for t in _unpack(p))
        Q = float(Q[0])
    else:
        X, x, w, v, Q = p
    if H is None:
        H = hessian_analytic(X, x, w, v, Q)
    S = coordinate_scales(X, x, w, v)
    Hs = -H * S[..., :, None] * S[..., None, :]
    rng = np.random.default_rng(seed)
    d = np.vstack([np.eye(4), rng.standard_normal((directions, 4))])
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    quad = np.einsum("ki,...ij,kj->...k", d, Hs, d)
    pure = quad.min(axis=-1)
    # the same directions in raw coordinates: d_raw = S d
    dx = d[None, :, 1] * S[..., 1:2]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(np.abs(d[:, 1]) > 0, quad / ((v / Q ** 2)[..., None] * dx * dx), np.inf)
    return {
        "pure": pure,
        "sampled": ratio.min(axis=-1),
        "exact": schur_margin(H, v, Q),
        "eig_min": np.linalg.eigvalsh(Hs)[..., 0],
        "scale": np.abs(bellman_array(X, x, w, v, Q)) + 1.0,
    }


def certificate_eig(H, X, x, w, v, Q, c_lower: float) -> np.ndarray:
    """Smallest eigenvalue of the scaled -H - (c_lower/Q^2) v E_xx; nonnegative
    exactly when the directional bound with constant c_lower holds."""
    A = -np.array(H, copy=True)
    A[..., 1, 1] -= c_lower / Q ** 2 * v
    S = coordinate_scales(X, x, w, v)
    return np.linalg.eigvalsh(A * S[..., :, None] * S[..., None, :])[..., 0]


def intermediate_margin(H, X, x, w, v, Q) -> np.ndarray:
    """Smallest eigenvalue of the scaled -H - (2/Q) v x^2 g g^T with
    g = (0, 1/x, -1/w, 0), i.e. of -d^2B minus (2/Q) v x^2 (dx/x - dw/w)^2.
    Recorded only; no sign is asserted."""
    S = coordinate_scales(X, x, w, v)
    g = np.zeros(np.shape(X) + (4,))
    with np.errstate(divide="ignore"):
        g[..., 1] = 1.0 / x
    g[..., 2] = -1.0 / w
    A = -H - (2.0 / Q) * (v * x * x)[..., None, None] * g[..., :, None] * g[..., None, :]
    return np.linalg.eigvalsh(A * S[..., :, None] * S[..., None, :])[..., 0]


# -- sweep -----------------------------------------------------------------------------

@dataclass
class SweepResult:
    Q: float
    count: int
    size_violations: int
    b_min_over_X: float
    b_max_over_X: float
    pure_min: float  # min of pure / scale
    eig_min: float  # min of eig_min / scale
    c_lower: float
    c_lower_sampled: float
    certificate_min: float
    key_slack_min: float
    key_equality_max: float  # max |slack| / (2Q-1)^2 at v = 1/w exactly
    decomposition_max: float
    structure_max: float
    shift_max: float
    w_prime_ok: bool
    fd_max_rel: float
    fd_points: int
    intermediate_min: float
    per_stratum: dict

    @property
    def passed(self) -> bool:
        return (
            self.size_violations == 0
            and self.pure_min >= -1e-6
            and self.c_lower > 0
            and self.key_slack_min >= -1e-12
            and self.key_equality_max <= 1e-12
            and self.decomposition_max <= 1e-12
            and self.structure_max <= 1e-12
            and self.w_prime_ok
        )


def sweep(Q: float, count: int = 10 ** 6, seed: int = 0, directions: int = 64, fd_points: int = 2000,
          chunk: int = 1 << 16) -> SweepResult:
    """Run every check on ``count`` stratified points."""
    smp = domain_sample(Q, count, seed)
    acc = {k: [] for k in ("b", "pure", "eig", "exact", "sampled", "key", "dec", "r1", "r2", "wp", "mid")}
    for i in range(0, count, chunk):
        sl = slice(i, min(count, i + chunk))
        X, x, w, v = smp.X[sl], smp.x[sl], smp.w[sl], smp.v[sl]
        H = hessian_analytic(X, x, w, v, Q)
        m = concavity_margin((X, x, w, v, Q), H, directions, seed + i)
        acc["b"].append(bellman_array(X, x, w, v, Q) / X)
        acc["pure"].append(m["pure"] / m["scale"])
        acc["eig"].append(m["eig_min"] / m["scale"])
        acc["exact"].append(m["exact"])
        acc["sampled"].append(m["sampled"])
        acc["key"].append(key_inequality_check(w, v, Q))
        acc["dec"].append(np.abs(decomposition_residual(X, x, w, v, Q)))
        r1, r2, wp = b1_b2_structure_check(X, x, w, v, Q)
        acc["r1"].append(np.abs(r1))
        acc["r2"].append(np.abs(r2))
        acc["wp"].append((wp > 0) & (wp >= w * (1 - 1e-12)))
        acc["mid"].append(intermediate_margin(H, X, x, w, v, Q) / m["scale"])
    cat = {k: np.concatenate(v) for k, v in acc.items()}
    c_lower = float(cat["exact"].min())
    # certificate and FD cross-check on a deterministic subsample
    idx = np.linspace(0, count - 1, min(fd_points, count)).astype(int)
    X, x, w, v = smp.X[idx], smp.x[idx], smp.w[idx], smp.v[idx]
    Ha = hessian_analytic(X, x, w, v, Q)
    Hf = hessian_fd(X, x, w, v, Q)
    S = coordinate_scales(X, x, w, v)
    scale = (np.abs(bellman_array(X, x, w, v, Q)) + 1.0)[..., None, None]
    Ss = S[..., :, None] * S[..., None, :]
    fd_rel = np.abs((Ha - Hf) * Ss) / (np.abs(Ha * Ss).max(axis=(-2, -1), keepdims=True) + scale)
    cert = certificate_eig(Ha, X, x, w, v, Q, c_lower) / scale[..., 0, 0]
    b = cat["b"]
    per = {}
    for k, name in enumerate(STRATA):
        sel = smp.stratum == k
        per[name] = {
            "pure_min": float(cat["pure"][sel].min()),
            "c_lower": float(cat["exact"][sel].min()),
            "b_min_over_X": float(b[sel].min()),
            "key_slack_min": float(cat["key"][sel].min()),
        }
    return SweepResult(
        Q=float(Q),
        count=count,
        size_violations=int(np.count_nonzero((b < 0) | (b > 2))),
        b_min_over_X=float(b.min()),
        b_max_over_X=float(b.max()),
        pure_min=float(cat["pure"].min()),
        eig_min=float(cat["eig"].min()),
        c_lower=c_lower,
        c_lower_sampled=float(cat["sampled"].min()),
        certificate_min=float(cert.min()),
        key_slack_min=float(cat["key"].min()),
        key_equality_max=float(np.max(np.abs(key_inequality_check(smp.w, 1.0 / smp.w, Q))) / (2 * Q - 1) ** 2),
        decomposition_max=float(cat["dec"].max()),
        structure_max=float(cat["r1"].max()),
        shift_max=float(cat["r2"].max()),
        w_prime_ok=bool(cat["wp"].all()),
        fd_max_rel=float(fd_rel.max()),
        fd_points=int(idx.size),
        intermediate_min=float(cat["mid"].min()),
        per_stratum=per,
    )
