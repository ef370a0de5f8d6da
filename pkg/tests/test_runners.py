import numpy as np
import pytest

from koranyi.experiments import runners
from koranyi.experiments.config import ExperimentConfig
from koranyi.quadrature import QuadratureSpec


def test_fit_loglog_exact_power():
    x = np.geomspace(1e-3, 1, 9)
    f = runners.fit_loglog(x, 3.0 * x ** -1.25)
    assert f.slope == pytest.approx(-1.25, abs=1e-12)
    assert np.exp(f.intercept) == pytest.approx(3.0)
    assert f.r2 == pytest.approx(1.0) and f.half_width < 1e-9 and f.points == 9


def test_fit_loglog_noisy_half_width():
    rng = np.random.default_rng(0)
    x = np.geomspace(1e-3, 1, 12)
    f = runners.fit_loglog(x, x ** 0.5 * np.exp(0.05 * rng.standard_normal(12)))
    assert abs(f.slope - 0.5) < 3 * f.half_width + 1e-3 and f.half_width > 0


def _small(name, n=2, **params):
    quad = {"green-check": QuadratureSpec(samples=20_000, epsilon=1e-4),
            "bound-check": QuadratureSpec(samples=2_000, inner_samples=16),
            "lp-constant": QuadratureSpec(samples=4_000, epsilon=1e-3, inner_samples=16),
            "sharpness": QuadratureSpec(samples=2_000, epsilon=1e-3, inner_samples=16),
            "a2-compare": QuadratureSpec(method="zonal-2d"),
            "cap-measure": QuadratureSpec(samples=10_000),
            "bellman": QuadratureSpec()}[name]
    return ExperimentConfig(name, n=n, quadrature=quad, params=params)


@pytest.mark.parametrize("name, params", [
    ("green-check", {"n_list": [1, 3], "ball_samples": 20_000}),
    ("bellman", {"q_list": [2.0], "count": 3_000, "fd_points": 50}),
    ("cap-measure", {"mc_samples": 10_000}),
    ("a2-compare", {"alpha_fractions": [0.5]}),
])
def test_runner_small_budget_passes(name, params):
    rep = runners.run(_small(name, **params))
    assert rep.passed, rep.checks
    assert rep.records and rep.runtime_s >= 0
    assert all(r.quad_hash for r in rep.records)


def test_bound_check_small():
    rep = runners.run(_small("bound-check", n_list=[1], apertures=[1.0]))
    assert rep.checks["ratios_finite"]
    assert all(np.isfinite(r.value) and r.value >= 0 for r in rep.records)


def test_lp_constant_small_negative_control():
    rep = runners.run(_small("lp-constant", n=1, functions=["coordinate"]))
    assert rep.checks["negative_control_defect"]
    assert rep.records[0].eps_delta is not None
    assert rep.records[-1].extra["predicted"] == 1.0


def test_sharpness_small_records_fits():
    rep = runners.run(_small("sharpness", j_list=[1, 2, 3], area=False, critical_variant=False))
    assert set(rep.fits) == {"q2_tilde_n2", "norm_n2"}
    assert set(rep.checks) == {"q2_tilde_slope", "norm_slope"}
    assert all(np.isfinite(f["slope"]) for f in rep.fits.values())


def test_deterministic_given_seed():
    a = runners.run(_small("cap-measure", mc_samples=5_000))
    b = runners.run(_small("cap-measure", mc_samples=5_000))
    assert [r.value for r in a.records] == [r.value for r in b.records]
