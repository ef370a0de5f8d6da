"""Acceptance criteria at their stated budgets and tolerances (slow: about 15 minutes)."""

import time

import numpy as np
import pytest

from conftest import random_ball
from koranyi.experiments.config import ExperimentConfig
from koranyi.experiments.runners import run
from koranyi.functions import CapStep, CoordinateRealPart, HarmonicPoly, RePower, power_weight
from koranyi.geometry import (
    Cap,
    SpherePoint,
    envelope_counterexamples,
    green_vs_power_check,
    mobius_transform,
    region_probe,
    triangle_violations,
)
from koranyi.kernels import invariant_laplacian_fd, laplacian_radial, poisson_szego
from koranyi.operators import gradient_sq_fd, kappa_norm, weighted_square_norm
from koranyi.quadrature import QuadratureSpec, sample_sphere, sphere_integral, zonal_integral
from koranyi.weights import BallSearch, better_than_doubling_check, invariant_a2, mobius_pullback_weight

ZONAL = QuadratureSpec(method="zonal-2d")


def test_criterion_1_green_identity(criterion):
    t0 = time.time()
    radial = run(ExperimentConfig("green-check", params={"ball_samples": 10, "n_list": [1, 2, 3, 5, 10]}))
    t_radial = time.time() - t0
    rows = [r for r in radial.records if r.params["rule"] == "radial-1d"]
    worst = max(abs(r.extra["error"]) for r in rows)
    t1 = time.time()
    per_n = {}
    zs = []
    for n in (1, 2, 3, 5, 10):
        s = time.time()
        rep = run(ExperimentConfig("green-check", params={"n_list": [n], "ball_samples": 10 ** 6}))
        per_n[n] = time.time() - s
        zs += [abs(r.extra["z_score"]) for r in rep.records if r.params["rule"] == "monte-carlo"]
    ok = worst <= 1e-3 and t_radial < 1.0 and max(zs) <= 3 and max(per_n.values()) < 60
    criterion(1, "green-identity", ok, f"radial max err {worst:.2e} in {t_radial:.2f} s, MC max |z| {max(zs):.2f}, "
              f"slowest n {max(per_n.values()):.1f} s", time.time() - t0)
    assert ok


def test_criterion_2_poisson_normalisation(criterion):
    t0 = time.time()
    worst = 0.0
    for n in (2, 3):
        for r in (0.0, 0.25, 0.5, 0.75, 0.9, 0.95):
            kern = lambda lam, r=r, n=n: ((1 - r * r) / np.abs(1 - r * np.conj(lam)) ** 2) ** n
            worst = max(worst, abs(zonal_integral(kern, n, peak_scale=1 - r) - 1.0))
    zmax = 0.0
    for i, z in enumerate((0.0, 0.5 + 0.3j, -0.9j, 0.95)):
        zz = np.array([z])
        res = sphere_integral(lambda x, zz=zz: poisson_szego(zz, x), QuadratureSpec(samples=10 ** 6, seed=i), 1)
        zmax = max(zmax, abs(res.value - 1.0) / res.std_error if res.std_error > 0 else abs(res.value - 1.0) * 1e12)
    t = time.time() - t0
    ok = worst <= 1e-6 and zmax <= 3 and t < 10
    criterion(2, "poisson-normalisation", ok, f"zonal max err {worst:.1e}, circle MC max |z| {zmax:.2f}", t)
    assert ok


def test_criterion_3_bellman(criterion):
    t0 = time.time()
    rep = run(ExperimentConfig("bellman"))
    t = time.time() - t0
    c = {r.params["Q"]: r.value for r in rep.records}
    ok = rep.passed and len(c) == 5 and t < 300
    criterion(3, "bellman", ok, "C_lower " + ", ".join(f"Q={q:g}: {v:.3g}" for q, v in c.items())
              + f"; checks {rep.checks}", t)
    assert ok


def test_criterion_4_a2_sandwich(criterion):
    t0 = time.time()
    rep = run(ExperimentConfig("a2-compare"))
    t = time.time() - t0
    ok = rep.checks["both_at_least_one"] and rep.checks["ratio_interval"] and t < 600
    criterion(4, "a2-sandwich", ok, rep.notes[-1], t)
    assert ok


def test_criterion_5_sharpness(criterion):
    # implemented at the stated tolerances; see the README for why the stated slopes are not attained
    t0 = time.time()
    rep = run(ExperimentConfig("sharpness"))
    t = time.time() - t0
    slopes = {k: round(v["slope"], 3) for k, v in rep.fits.items()}
    ok = rep.checks["q2_tilde_slope"] and rep.checks["norm_slope"] and rep.checks["area_slope"] and t < 1800
    criterion(5, "sharpness", ok, f"slopes {slopes}", t)
    assert ok


def test_criterion_6_inequality_chain(criterion):
    t0 = time.time()
    rep = run(ExperimentConfig("bound-check"))
    t = time.time() - t0
    mx = {k: max(r.extra[k] for r in rep.records) for k in ("r1", "r2", "r3")}
    ok = rep.passed and len(rep.records) == 54 and t < 3600
    criterion(6, "inequality-chain", ok, ", ".join(f"max {k} {v:.4g}" for k, v in mx.items()) + "; " + rep.notes[0], t)
    assert ok


def test_criterion_7_geometry(criterion):
    t0 = time.time()
    tri = sum(triangle_violations(n, 10 ** 5 // 3 + 1, seed=n) for n in (1, 2, 3))
    env = sum(envelope_counterexamples(2, a, 10 ** 5 // 3 + 1, seed=7)[0] for a in (0.75, 1.0, 2.0))
    probe = region_probe(2, 0.4, 10 ** 6, seed=11)
    caps = {n: run(ExperimentConfig("cap-measure", n=n)) for n in (1, 2, 3)}
    slopes = {n: round(r.fits[next(iter(r.fits))]["slope"], 4) for n, r in caps.items()}
    r = np.concatenate([np.linspace(1e-3, 0.999, 2000), 1 - np.geomspace(1e-3, 1e-8, 200)])
    gmin = min(float(np.min(green_vs_power_check(r, n))) for n in (1, 2, 3, 5, 10))
    t = time.time() - t0
    ok = tri == 0 and env == 0 and probe == 0 and all(c.passed for c in caps.values()) and gmin >= 1.0 and t < 300
    criterion(7, "geometry", ok, f"triangle {tri}, envelope {env}, a=0.4 hits {probe}, cap slopes {slopes}, "
              f"green/power min {gmin:.4f}", t)
    assert ok


def test_criterion_8_better_than_doubling(criterion):
    t0 = time.time()
    rng = np.random.default_rng(8)
    count = 1000
    centers = sample_sphere(count, 2, 8)
    centers[rng.random(count) < 0.2] = [1.0, 0.0]  # pole-centred pairs use the deterministic path
    outer = np.sqrt(2) * rng.uniform(0.05, 1.0, count)
    inner = outer * rng.uniform(0.05, 1.0, count)
    weights = {"omega_0.5": power_weight(2, 0.5),
               "cap-step": CapStep(2, [(Cap(SpherePoint.basis(2), 0.4), 5.0),
                                       (Cap(SpherePoint(np.array([0.6, 0.8j])), 0.8), 2.0)])}
    bad = {}
    for name, w in weights.items():
        bad[name] = 0
        for i in range(count):
            c = SpherePoint(centers[i])
            s = better_than_doubling_check(w, Cap(c, inner[i]), Cap(c, outer[i]), QuadratureSpec(seed=i))
            bad[name] += s.value < -3 * s.std_error - 1e-12
    t = time.time() - t0
    ok = sum(bad.values()) == 0 and t < 300
    criterion(8, "better-than-doubling", ok, f"violations {bad} over {count} pairs each", t)
    assert ok


def _kappa_worst(count, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in range(count):
        n = int(rng.integers(1, 5))
        kind = i % 3
        if kind == 0 or n == 1:
            f = CoordinateRealPart(n, int(rng.integers(n)), complex(*rng.standard_normal(2)))
        elif kind == 1:
            g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            f = RePower(n, int(rng.integers(1, 4)), g / np.linalg.norm(g))
        else:
            f = HarmonicPoly(n, int(rng.integers(n)))
        z = random_ball(rng, 1, n, 0.95)[0]
        u = f.exact_extension
        c = gradient_sq_fd(u, z, "contraction")
        m = gradient_sq_fd(u, z, "mobius-pullback")
        if m > 1e-10:
            worst = max(worst, abs(c / (kappa_norm(n) * m) - 1.0))
    return worst


def test_criterion_9_cross_oracles(criterion):
    t0 = time.time()
    # gradient: contraction vs Mobius pullback over random (f, z)
    kappa_err = _kappa_worst(1000, 9)
    # Fubini vs nested weighted square norm
    f, w = CoordinateRealPart(2), power_weight(2, 0.5)
    fub = weighted_square_norm(f, w, 1.0, QuadratureSpec(samples=100_000, inner_samples=64, epsilon=1e-3, seed=1))
    nest = weighted_square_norm(f, w, 1.0, QuadratureSpec(samples=4000, inner_samples=64, epsilon=1e-3, seed=2),
                                path="nested", outer_count=64)
    z_fn = abs(fub.value - nest.value) / np.hypot(fub.std_error, nest.std_error)
    # FD invariant Laplacian vs the radial form, tolerance 1e-6 (|lap u| + 1)
    rng = np.random.default_rng(99)
    lap_err = 0.0
    for k in (1, 2):
        prof = (lambda s, k=k: s ** (2 * k), lambda s, k=k: 2 * k * s ** (2 * k - 1),
                lambda s, k=k: 2 * k * (2 * k - 1) * s ** (2 * k - 2))
        u = lambda p, k=k: np.sum(np.abs(p) ** 2, -1) ** k
        for n in (1, 2, 3, 5):
            for z in random_ball(rng, 25, n, 0.95):
                exact = float(laplacian_radial(prof[0], np.array([np.linalg.norm(z)]), n, *prof[1:])[0])
                lap_err = max(lap_err, abs(invariant_laplacian_fd(u, z) - exact) / (abs(exact) + 1))
    # pullback invariance of Q~_2: zonal ray estimate vs the Mobius-sampled pulled-back weight
    base = invariant_a2(w, BallSearch(directions=4), ZONAL)
    pulled = invariant_a2(mobius_pullback_weight(w, np.array([0.3, 0.4j])), BallSearch(directions=4),
                          QuadratureSpec(inner_samples=1 << 14, seed=3))
    z_q = abs(pulled.value - base.value) / pulled.details["grid_se"]
    t = time.time() - t0
    ok = kappa_err <= 0.01 and z_fn <= 3 and lap_err <= 1e-6 and z_q <= 3
    criterion(9, "cross-oracles", ok, f"kappa max rel err {kappa_err:.1e}, Fubini vs nested |z| {z_fn:.2f}, "
              f"FD vs radial Laplacian {lap_err:.1e}, pullback Q~2 {pulled.value:.4f} vs {base.value:.4f} "
              f"(|z| {z_q:.2f})", t)
    assert ok
