import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from flatlab.errors import InvalidMeasure
from flatlab.genericity import constant_function, smoothed_systole_indicator
from flatlab.group import IDENTITY, geodesic, rotation
from flatlab.linalg import int_matmul
from flatlab.random_walk import (HeightFunction, WalkMeasure, WalkTrajectory, circle_average, drift_check,
                                 height_along, read_walk_csv, sample_step, sample_steps, stationarity_curve,
                                 stationarity_defect, sublinear_tracking, visit_control, walk, write_walk_csv)
from flatlab.surface import _combinatorics, apply, area

MU = WalkMeasure.default()


@pytest.fixture(scope="module")
def l3_walk(L3):
    return walk(MU, L3, 400, 11)


# ----------------------------------------------------------------- measure

@pytest.mark.parametrize("knots,values", [
    ((0.0,), (1.0,)),
    ((0.0, 1.0), (0.0, 0.0)),
    ((0.0, 3.0), (1.0, 1.0)),
    ((0.5, 0.2), (1.0, 1.0)),
    ((0.0, 1.0), (1.0, -1.0)),
    ((0.0, math.inf), (1.0, 1.0)),
])
def test_invalid_measures(knots, values):
    with pytest.raises(InvalidMeasure):
        WalkMeasure(knots, values)


def test_default_density_has_unit_mass():
    assert MU.expect(lambda s: np.ones_like(s)) == pytest.approx(1.0, rel=1e-10)
    assert MU.cdf(MU.s_max) == pytest.approx(1.0, rel=1e-12)
    assert MU.s_max == 1.0


@given(st.floats(0, 1))
def test_quantile_inverts_cdf(u):
    assert float(MU.cdf(MU.quantile(u))) == pytest.approx(u, abs=1e-12)


def test_mean_log_norm_matches_quadrature():
    # log||g|| is the radial coordinate s itself
    rng = np.random.default_rng(0)
    steps = sample_steps(MU, 2000, rng)
    s = np.array([math.log(g.norm()) for g in steps])
    assert np.all(s <= MU.s_max + 1e-12)
    big = MU.quantile(np.random.default_rng(1).uniform(size=10 ** 5))
    want = MU.mean()
    for sample in (s, big):
        se = sample.std() / math.sqrt(len(sample))
        assert abs(sample.mean() - want) <= 3 * se


def test_bi_invariance():
    rng = np.random.default_rng(7)
    g = sample_steps(MU, 3000, rng)
    a, b = 0.9, -2.3
    moved = [rotation(a) @ x @ rotation(b) for x in sample_steps(MU, 3000, rng)]
    # entries are not rotation invariant individually, so this tests the sampler
    assert stats.ks_2samp([x.a for x in g], [x.a for x in moved]).pvalue > 0.01
    assert stats.ks_2samp([x.norm() for x in g], [x.norm() for x in moved]).pvalue > 0.01


def test_sample_steps_matches_repeated_sample_step():
    r1, r2 = np.random.default_rng(5), np.random.default_rng(5)
    assert sample_steps(MU, 4, r1) == [sample_step(MU, r2) for _ in range(4)]


# -------------------------------------------------------------------- walk

def test_empty_walk(L3):
    tr = walk(MU, L3, 0, 1)
    assert tr.n == 0 and len(tr.states) == 1 and len(tr.stream) == 0


def test_walk_is_deterministic(L3):
    a, b = walk(MU, L3, 50, 3), walk(MU, L3, 50, 3)
    assert a.steps == b.steps
    assert [s.vec for s in a.states] == [s.vec for s in b.states]
    assert a.stream.matrices == b.stream.matrices
    assert walk(MU, L3, 50, 4).steps != a.steps


def test_step_norm_bound(l3_walk):
    assert max(g.norm() for g in l3_walk.steps) <= math.exp(MU.s_max) * (1 + 1e-12)


def test_states_keep_area(l3_walk, L3):
    A = float(area(L3))
    for tri in l3_walk.states[::20]:
        tot = 0.0
        for f in tri.faces:
            (x1, y1), (x2, y2) = tri.hol(f[0]), tri.hol(f[1])
            tot += (x1 * y2 - x2 * y1) / 2
        assert tot == pytest.approx(A, rel=1e-9)


def _periods(tri):
    coord = np.array(_combinatorics(tri.key()).coord, dtype=float).reshape(-1, len(tri.vec))
    return np.array(tri.vec).T @ coord.T


def test_cocycle_identity(L3):
    tr = walk(MU, L3, 30, 5)
    s = tr.stream
    P0 = _periods(tr.states[0])
    G = IDENTITY
    for k in range(1, 31):
        G = tr.steps[k - 1] @ G
        whole = s.product(0, k)
        for j in range(k):
            assert whole == int_matmul(s.product(j, k), s.product(0, j))
        # the integer cocycle carries the periods of x_0 to those of x_k
        Pk = _periods(tr.states[k])
        want = G.matrix() @ P0 @ np.array(whole, dtype=float).T
        assert np.max(np.abs(Pk - want)) <= 1e-9 * max(1.0, np.max(np.abs(want)))


# ------------------------------------------------------------ stationarity

def test_constant_function_has_no_defect(l3_walk):
    assert stationarity_defect(l3_walk, constant_function(1.0)) == pytest.approx(0.0, abs=1e-15)


def test_single_state_defect(l3_walk):
    phi = smoothed_systole_indicator(0.3, 0.2)
    x = l3_walk.states[0]
    hs = sample_steps(MU, 8, l3_walk.mc_rng())
    want = abs(phi(x) - sum(phi.at(x, h) for h in hs) / 8)
    assert stationarity_defect(l3_walk, phi, N=1) == pytest.approx(want, abs=1e-15)


def test_stationarity_curve_validation(l3_walk, L3):
    phi = smoothed_systole_indicator(0.3, 0.2)
    with pytest.raises(ValueError):
        stationarity_curve(l3_walk, phi, [0])
    with pytest.raises(ValueError):
        stationarity_curve(l3_walk, phi, [402])
    with pytest.raises(ValueError):
        stationarity_defect(l3_walk, phi, measure=WalkMeasure((0.0, 0.5), (1.0, 1.0)))
    with pytest.raises(ValueError):
        stationarity_curve(walk(MU, None, 10, 0), phi, [5])


# -------------------------------------------------------- height function

def test_height_function_examples(torus):
    f = HeightFunction()
    assert f(torus) == pytest.approx(2.0)  # two unit connections
    thin = apply(geodesic(-math.log(0.05)), torus)
    assert f(thin) == pytest.approx(0.05 ** -1.2, rel=1e-9)
    with pytest.raises(ValueError):
        HeightFunction(delta=1.5)


def test_drift_inequality_on_thin_torus(torus):
    f = HeightFunction()
    samples = [apply(geodesic(t), torus) for t in np.linspace(0, 2.5, 11)]
    table = drift_check(f, samples, t=2.0, n_theta=256)
    assert np.all(table.averages <= table.c * table.f_values + table.b + 1e-12)
    assert table.c < 1
    # the round torus sits in the compact part: the average is O(1)
    assert table.averages[0] < 3
    thin = apply(geodesic(-math.log(0.05)), torus)
    assert circle_average(f, thin, 2.0, 256) < f(thin) / 2 + table.b


def test_drift_degenerate_fit(torus):
    table = drift_check(HeightFunction(), [torus], t=1.0, n_theta=64)
    assert table.c == 1.0 and table.b >= 0


def test_visit_control(L3):
    f = HeightFunction()
    tr = walk(MU, L3, 1500, 3)
    vals = height_along(tr, f)
    vc = visit_control(tr, f, [0.0, vals.max() + 1], values=vals)
    assert vc.fractions.tolist() == [1.0, 0.0]
    vc = visit_control(tr, f, [4, 8, 16], values=vals)
    assert np.all(np.diff(vc.fractions) < 0)
    assert vc.envelope_ok()


# ---------------------------------------------------------------- tracking

def test_deterministic_geodesic_tracks_exactly():
    tr = WalkTrajectory(0, MU, [geodesic(0.1)] * 200)
    t = sublinear_tracking(tr, [50, 100, 200])
    assert t.lambda_hat == pytest.approx(0.1, abs=1e-12)
    assert t.theta_bar == pytest.approx(0.0, abs=1e-12) or t.theta_bar == pytest.approx(math.pi, abs=1e-12)
    assert np.all(t.errors <= 1e-12)


def test_tracking_needs_enough_steps():
    with pytest.raises(ValueError):
        sublinear_tracking(walk(MU, None, 50, 0))


def test_tracking_error_shrinks():
    tr = walk(MU, None, 2000, 9)
    t = sublinear_tracking(tr, [100, 500, 2000])
    assert t.lambda_hat == pytest.approx(MU.lyapunov_exponent(), abs=0.05)
    assert 0 <= t.theta_bar < math.pi
    assert t.errors[-1] < t.errors[0]


# --------------------------------------------------------------------- csv

def test_walk_csv_round_trip(tmp_path):
    rows = [{"seed": 1, "n": 500, "lambda_hat": 0.0712, "theta_bar": 1.2, "e_n": 0.003,
             "stationarity_defect": None},
            {"seed": 2, "n": 1000, "lambda_hat": 1 / 3, "theta_bar": 0.1, "e_n": 1e-5,
             "stationarity_defect": 0.02}]
    path = tmp_path / "w.csv"
    write_walk_csv(path, rows)
    assert read_walk_csv(path) == rows
    write_walk_csv(tmp_path / "w2.csv", rows)
    assert path.read_bytes() == (tmp_path / "w2.csv").read_bytes()
