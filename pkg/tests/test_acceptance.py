"""Acceptance criteria, each run at its stated size and tolerance.

Every test records one PASS/FAIL line; the lines are printed together in the
terminal summary by the ``record`` fixture in ``conftest.py``. Run only these with ``-m slow``.
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from flatlab.builtins import SURFACES, builtin_surface
from flatlab.flow import delaunay_stream
from flatlab.genericity import (alpha_t, p_invariance_curve, smoothed_systole_indicator, correlation_decay,
                                stratified_thetas, theta_consistency)
from flatlab.group import decomposition_identity, geodesic, rotation
from flatlab.iet import rauzy_stream, theta_from_slope
from flatlab.linalg import standard_symplectic, symplectic_defect
from flatlab.lyapunov import (accumulate, bad_subspace_margin, exact_singular_values, exterior_stream,
                              lyapunov_spectrum, qr_chain_singular_values)
from flatlab.random_walk import (HeightFunction, WalkMeasure, drift_check, final_direction, height_along,
                                 stationarity_curve, sublinear_tracking, visit_control, walk)
from flatlab.roth import roth_condition_a, roth_times
from flatlab.surface import apply, geodesic_normalize
from flatlab.windtree import WindTreeConfig, diffusion_exponent, geometric_checkpoints

pytestmark = pytest.mark.slow

GOLDEN = (5 ** 0.5 - 1) / 2
PHI = smoothed_systole_indicator(0.3, 0.2)
MU = WalkMeasure.default()


def test_01_exact_algebra(record):
    t0 = time.perf_counter()
    xs = np.linspace(1e-6, math.pi / 2 - 1e-6, 10 ** 4)
    worst = max(decomposition_identity(float(x))[3] for x in xs)
    eq = 0.0
    for alpha in np.linspace(-2, 2, 41):
        for t in np.linspace(0, 5, 21):
            a = alpha_t(float(alpha), float(t))
            eq = max(eq, abs(math.exp(2 * t) * math.tan(a) - alpha) / max(1.0, abs(alpha)))
    dt = time.perf_counter() - t0
    record(1, "exact algebra", worst <= 1e-12 and eq <= 1e-12 and dt < 1.0,
           f"max residual {worst:.2e}, alpha_t equation error {eq:.2e}, {dt:.2f}s")


def test_02_symplecticity(record):
    t0 = time.perf_counter()
    bad, total = 0, 0
    for name in sorted(SURFACES):
        S = builtin_surface(name)
        J = standard_symplectic(2 * S.genus).tolist()
        rng = np.random.default_rng(2)
        for _ in range(1000):
            g = rotation(rng.uniform(0, 2 * math.pi)) @ geodesic(rng.uniform(0, 1))
            S, X = geodesic_normalize(apply(g, S))
            total += 1
            bad += symplectic_defect([[int(x) for x in row] for row in X], J) != 0
    dt = time.perf_counter() - t0
    record(2, "symplecticity", bad == 0 and dt < 60, f"{bad} defective of {total} steps, {dt:.1f}s")


def test_03_torus_spectrum(record, torus):
    t0 = time.perf_counter()
    est = lyapunov_spectrum(delaunay_stream(torus, theta_from_slope(GOLDEN), 1e4))
    dt = time.perf_counter() - t0
    err = float(np.max(np.abs(est.exponents - [1, -1])))
    record(3, "torus spectrum", err <= 0.02 and dt < 60, f"lambda {np.round(est.exponents, 4)}, {dt:.1f}s")


@pytest.fixture(scope="module")
def h2_runs(L3):
    t0 = time.perf_counter()
    thetas = np.random.default_rng(4).uniform(-1.2, 1.2, 8)
    runs = []
    for th in thetas:
        s = delaunay_stream(L3, float(th), 1e4)
        runs.append((float(th), s, lyapunov_spectrum(s), lyapunov_spectrum(rauzy_stream(L3, float(th), 1e4))))
    return runs, time.perf_counter() - t0


def test_04_h2_exponents(record, h2_runs):
    runs, dt = h2_runs
    gap = max(float(np.max(np.abs(d.exponents[:2] - r.exponents[:2]))) for _, _, d, r in runs)
    lam1 = [d.exponents[0] for _, _, d, _ in runs] + [r.exponents[0] for _, _, _, r in runs]
    lam2 = [d.exponents[1] for _, _, d, _ in runs] + [r.exponents[1] for _, _, _, r in runs]
    ok = gap <= 0.02 and all(0.97 <= x <= 1.03 for x in lam1) and all(0.05 < x < 0.95 for x in lam2)
    record(4, "H(2) exponents", ok and dt < 600,
           f"backend gap {gap:.4f}, lambda_2 in [{min(lam2):.3f}, {max(lam2):.3f}], {dt:.0f}s")


def test_05_exterior_power(record, h2_runs):
    runs, _ = h2_runs
    worst = 0.0
    for _, s, d, _ in runs:
        top = lyapunov_spectrum(exterior_stream(s, 2)).exponents[0]
        se = math.hypot(d.stderr[0], d.stderr[1])
        worst = max(worst, abs(top - d.exponents[0] - d.exponents[1]) / se)
    record(5, "exterior power", worst <= 1.0, f"worst gap {worst:.3f} combined stderrs")


def test_06_oracle_equivalence(record):
    worst = 0.0
    for name in sorted(SURFACES):
        S = builtin_surface(name)
        for T in (5.0, 20.0):
            frame = accumulate(delaunay_stream(S, 0.83, T), keep_raw=True)
            exact = np.array(exact_singular_values(frame.raw_integer_product))
            chain = np.array(qr_chain_singular_values(frame))
            worst = max(worst, float(np.max(np.abs(chain - exact) / exact)))
    record(6, "QR chain vs exact product", worst <= 1e-6, f"max relative error {worst:.2e}")


def test_07_birkhoff_consistency(record, L3):
    t0 = time.perf_counter()
    thetas = np.random.default_rng(7).uniform(0, 2 * math.pi, 20)
    res = theta_consistency(L3, PHI, [1000.0, 2000.0, 4000.0], thetas=thetas)
    other = theta_consistency(apply(rotation(0.4) @ geodesic(0.3), L3), PHI, 2000.0, thetas=thetas)
    m1, m2 = res[2000.0].mean, other[2000.0].mean
    base = abs(m1 - m2) / max(abs(m1), abs(m2))
    s1, s2, s4 = res[1000.0].spread, res[2000.0].spread, res[4000.0].spread
    dt = time.perf_counter() - t0
    record(7, "Birkhoff consistency", s2 <= 0.05 and base <= 0.05 and s4 < s1 and dt < 900,
           f"spread T=1000/2000/4000 {s1:.4f}/{s2:.4f}/{s4:.4f}, basepoints differ {base:.4f}, {dt:.0f}s")


def test_08_correlation_decay(record, L3):
    t0 = time.perf_counter()
    res = correlation_decay(L3, PHI, 0.5, [1.0, 1.5, 2.0, 3.0, 4.0, 6.0], n_theta=512, seed=0,
                            min_gap=0.5, max_gap=5.0)
    dt = time.perf_counter() - t0
    ok = res.rate > 0 and not res.violations() and res.zero_mean_ok and dt < 900
    record(8, "correlation decay", ok,
           f"fit C={res.C:.4f} rate={res.rate:.3f}, {len(res.violations())} violations, "
           f"zero mean {'ok' if res.zero_mean_ok else 'violated'}, {dt:.0f}s")


def test_09_p_invariance(record, L3):
    t0 = time.perf_counter()
    thetas = np.random.default_rng(1).uniform(0, 2 * math.pi, 20)
    rates = {}
    for alpha in (0.3, 0.7):
        wins = 0
        for th in thetas:
            c = p_invariance_curve(L3, PHI, alpha, float(th), [1000.0, 4000.0])
            wins += c[4000.0] < c[1000.0]
        rates[alpha] = wins / len(thetas)
    dt = time.perf_counter() - t0
    record(9, "P-invariance", all(r >= 0.8 for r in rates.values()) and dt < 900,
           f"defect shrank for {rates[0.3]:.0%} (alpha 0.3) and {rates[0.7]:.0%} (alpha 0.7) of 20 directions, "
           f"{dt:.0f}s")


def test_10_walk_genericity(record, L3):
    wins, drift = 0, 0.0
    for seed in range(50):
        tr = walk(MU, L3, 4000, seed)
        d = stationarity_curve(tr, PHI, [500, 4000])
        wins += d[1] < d[0]
        a = lyapunov_spectrum(tr.stream.window(0, 2000)).exponents[0]
        b = lyapunov_spectrum(tr.stream).exponents[0]
        drift = max(drift, abs(a - b))
    rate = wins / 50
    record(10, "walk genericity", rate >= 0.9 and drift < 0.05,
           f"defect shrank for {rate:.0%} of 50 seeds, top exponent N=2000 vs 4000 differ by <= {drift:.4f}")


def test_11_sublinear_tracking(record):
    wins = 0
    for seed in range(200):
        t = sublinear_tracking(walk(MU, None, 5000, seed), [200, 2000, 5000])
        wins += t.errors[1] < t.errors[0]
    thetas = np.array([final_direction(walk(MU, None, 500, 10 ** 4 + seed).steps) for seed in range(500)])
    p = stats.kstest(thetas / math.pi, "uniform").pvalue
    rate = wins / 200
    record(11, "sublinear tracking", rate >= 0.95 and p > 0.01,
           f"e_2000 < e_200 for {rate:.1%} of 200 seeds, KS p = {p:.3f} on 500 directions")


def test_12_drift_and_visits(record, torus, L3):
    f = HeightFunction(0.2)
    samples = [apply(rotation(th) @ geodesic(math.log(1 / s)), S)
               for S in (torus, L3) for s in (1.0, 0.5, 0.2, 0.1, 0.05) for th in (0.0, 0.4)]
    table = drift_check(f, samples, t=2.0, n_theta=256)
    tr = walk(MU, L3, 2000, 0)
    vc = visit_control(tr, f, [2, 4, 8, 16], values=height_along(tr, f))
    ok = table.c < 1 and vc.envelope_ok() and bool(np.all(np.diff(vc.fractions) < 0))
    record(12, "drift and visit control", ok,
           f"drift c={table.c:.3f} b={table.b:.3f}, visit fractions {np.round(vc.fractions, 3).tolist()} "
           f"fall like M^-{vc.p:.2f}")


def test_13_windtree(record):
    t0 = time.perf_counter()
    cps = geometric_checkpoints(100, 1e6, 8)
    slopes = {}
    for a, b in [(0.5, 0.5), (0.25, 0.5), (0.37, 0.61)]:
        cfg = WindTreeConfig(a, b)
        res = diffusion_exponent(cfg, cfg.free_point(), stratified_thetas(32, np.random.default_rng(0)), cps,
                                 fit_from=1e3)
        slopes[(a, b)] = res.slope
    dt = time.perf_counter() - t0
    ok = all(abs(s - 2 / 3) <= 0.07 for s in slopes.values()) and dt < 1800
    record(13, "wind-tree exponent", ok,
           ", ".join(f"({a:g},{b:g}) {s:.3f}" for (a, b), s in slopes.items()) + f", {dt:.0f}s")


def test_14_roth_condition_a(record, torus, L3):
    def shrinks(S, th):
        # the i = 1 ratio is identically 1 (t_0 = 0), which would make the early window
        # [1, 10] pass trivially; roth_condition_a starts at i = 2
        r = roth_condition_a(roth_times(S, th, 30))
        return max(r[i] for i in range(20, 31)) < max(r[i] for i in range(2, 11))

    golden = shrinks(torus, theta_from_slope(GOLDEN))
    thetas = np.random.default_rng(0).uniform(-1.2, 1.2, 20)
    rates = {name: np.mean([shrinks(S, float(th)) for th in thetas]) for name, S in (("torus", torus), ("L3", L3))}
    ok = golden and all(r >= 0.8 for r in rates.values())
    record(14, "Roth condition (a)", ok,
           f"golden torus {'ok' if golden else 'not ok'}, torus {rates['torus']:.0%}, L3 {rates['L3']:.0%} "
           "of 20 directions")


def test_15_bad_subspace(record):
    rng = np.random.default_rng(15)
    worst = math.inf
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        a = rng.normal(size=(n, n)) * np.exp(rng.uniform(-3, 3, size=n))
        u, _, vt = np.linalg.svd(a)
        # v = cos * top + sin * w, with w in the span of the other right singular vectors
        w = vt[1:].T @ rng.normal(size=n - 1)
        w /= np.linalg.norm(w)
        phi = rng.uniform(0, math.pi / 2)
        v = math.cos(phi) * vt[0] + math.sin(phi) * w
        av, sigma, norm = bad_subspace_margin(a, v)
        worst = min(worst, av / (sigma * norm) - 1 if sigma > 0 else math.inf)
    record(15, "bad subspace inequality", worst >= -1e-10, f"min ||Av|| / (sigma ||A||) - 1 = {worst:.2e}")
