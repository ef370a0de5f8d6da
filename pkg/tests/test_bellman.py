import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from koranyi.bellman import (
    STRATA,
    BellmanPoint,
    DomainError,
    b1_b2_structure_check,
    bellman_value,
    certificate_eig,
    concavity_margin,
    decomposition_residual,
    domain_sample,
    hessian_analytic,
    hessian_fd,
    key_inequality_check,
    schur_margin,
    sweep,
)

Qs = st.sampled_from([1.5, 2.0, 10.0, 100.0, 1e4])


@st.composite
def domain_points(draw):
    Q = draw(Qs)
    X = 10 ** draw(st.floats(-3, 3))
    w = 10 ** draw(st.floats(-3, 3))
    t = draw(st.floats(1.0 + 1e-6, Q - 1e-6 * (Q - 1)))
    s = draw(st.floats(0.0, 0.999))
    sign = draw(st.sampled_from([-1.0, 1.0]))
    return BellmanPoint(X, sign * np.sqrt(s * X * w), w, t / w, Q)


def test_point_validation():
    with pytest.raises(DomainError):
        BellmanPoint(1.0, 2.0, 1.0, 1.0, 2.0)
    with pytest.raises(DomainError):
        BellmanPoint(1.0, 0.0, 1.0, 5.0, 2.0)
    with pytest.raises(DomainError):
        BellmanPoint(1.0, 0.0, 1.0, 1.0, 0.5)


@given(domain_points())
def test_size_bounds(p):
    b = bellman_value(p)
    assert -1e-12 * p.X <= b <= 2 * p.X * (1 + 1e-12)


@given(Qs, st.floats(0.0, 1.0))
def test_key_inequality(Q, s):
    t = 1 + s * (Q - 1)
    assert key_inequality_check(t, 1.0, Q) >= -1e-12 * (2 * Q - 1) ** 2
    assert abs(key_inequality_check(1.0, 1.0, Q)) <= 1e-12 * (2 * Q - 1) ** 2


@given(domain_points())
def test_identities(p):
    assert abs(decomposition_residual(p.X, p.x, p.w, p.v, p.Q)) < 1e-12
    r1, r2, wp = b1_b2_structure_check(p.X, p.x, p.w, p.v, p.Q)
    assert abs(r1) < 1e-12 and abs(r2) < 1e-12 and wp >= p.w * (1 - 1e-12)


@given(domain_points())
def test_analytic_hessian_matches_fd(p):
    Ha = hessian_analytic(p.X, p.x, p.w, p.v, p.Q)
    Hf = hessian_fd(p.X, p.x, p.w, p.v, p.Q)
    S = np.array([p.X, np.sqrt(p.X * p.w), p.w, p.v])
    err = np.abs((Ha - Hf) * S[:, None] * S[None, :])
    assert err.max() <= 1e-5 * (np.abs(Ha * S[:, None] * S[None, :]).max() + abs(bellman_value(p)) + 1)
    assert np.all(Ha[0] == 0) and np.all(Ha[:, 0] == 0)


@given(domain_points())
def test_concavity(p):
    m = concavity_margin(p, directions=32)
    assert m["pure"][0] >= -1e-9 * m["scale"][0]
    assert m["exact"][0] > 0
    assert m["exact"][0] <= m["sampled"][0] * (1 + 1e-9)


def test_certificate_consistent_with_schur():
    s = domain_sample(2.0, 200, 1)
    H = hessian_analytic(s.X, s.x, s.w, s.v, 2.0)
    c = schur_margin(H, s.v, 2.0)
    lo = 0.5 * c.min()
    assert np.all(certificate_eig(H, s.X, s.x, s.w, s.v, 2.0, lo) >= -1e-9)


@pytest.mark.parametrize("Q", [1.5, 1e4])
def test_domain_sample_strata(Q):
    s = domain_sample(Q, 4000, 3)
    assert set(np.unique(s.stratum)) == set(range(len(STRATA)))
    t = s.w * s.v
    assert np.all((t >= 1) & (t <= Q)) and np.all(s.x ** 2 < s.X * s.w)
    assert next(iter(s.points())).Q == Q


def test_sweep_small_and_reproducible():
    a = sweep(10.0, 8000, seed=2, fd_points=100, chunk=3000)
    b = sweep(10.0, 8000, seed=2, fd_points=100, chunk=3000)
    assert a.passed and a.c_lower > 0 and a.size_violations == 0
    assert a.c_lower == b.c_lower and a.fd_max_rel == b.fd_max_rel
    assert set(a.per_stratum) == set(STRATA)
