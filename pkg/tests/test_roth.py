import pytest

from flatlab.errors import TimeHorizonExceeded
from flatlab.iet import theta_from_slope
from flatlab.roth import (DelaunayOrbit, RothTimes, read_condition_c_csv, roth_condition_a, roth_condition_b,
                          roth_condition_c, roth_times, write_condition_a_csv, write_condition_c_csv)

GOLDEN = (5 ** 0.5 - 1) / 2
PHI = (1 + 5 ** 0.5) / 2


@pytest.fixture(scope="module")
def golden_torus(torus):
    th = theta_from_slope(GOLDEN)
    orbit = DelaunayOrbit(torus, th)
    return orbit, roth_times(torus, th, 30, orbit=orbit)


def test_linear_and_geometric_times():
    lin = roth_condition_a(RothTimes(tuple(0.7 * i for i in range(1, 41))))
    assert all(q == pytest.approx(1 / i) for i, q in lin.items())
    geo = roth_condition_a(RothTimes(tuple(2.0 ** i for i in range(1, 21))))
    assert all(q == pytest.approx(0.5) for q in geo.values())


def test_times_must_increase():
    with pytest.raises(ValueError):
        RothTimes((1.0, 1.0))


def test_golden_torus_ratios_decay(golden_torus):
    _, times = golden_torus
    ratios = roth_condition_a(times)
    assert ratios[30] < 0.2
    assert max(ratios[i] for i in range(20, 31)) < max(ratios[i] for i in range(2, 11))


def test_rational_slope_never_resolves(torus):
    with pytest.raises(TimeHorizonExceeded):
        roth_times(torus, theta_from_slope(0.5), 3)


def test_origami_times_increase(L3):
    times = roth_times(L3, theta_from_slope(GOLDEN), 10)
    assert all(b > a for a, b in zip(times.times, times.times[1:]))


def test_condition_b_torus_bounded(golden_torus):
    orbit, _ = golden_torus
    rep = roth_condition_b(orbit, 40.0)
    # the zero-period line contracts, so its norm never exceeds its start
    assert max(rep.log_norm_v0) <= 1e-9
    assert rep.exponent <= 0
    assert rep.alignment == pytest.approx(1.0, abs=1e-6)


def test_condition_b_origami_below_one(L3):
    orbit = DelaunayOrbit(L3, theta_from_slope(GOLDEN))
    rep = roth_condition_b(orbit, 60.0)
    assert 0 < rep.exponent < 1


def test_condition_c_golden_torus(golden_torus, tmp_path):
    orbit, times = golden_torus
    rep = roth_condition_c(orbit, times, [2, 5], [1, 2, 4, 8])
    assert rep.stable_dim == 1
    for row in rep.rows:
        # hyperbolic block of the golden torus: norm phi^(2r); stable part contracts
        assert row.block_norm == pytest.approx(PHI ** (2 * row.r), rel=1e-6)
        assert row.stable_norm <= 1.0
    path = tmp_path / "c.csv"
    write_condition_c_csv(path, rep)
    back = read_condition_c_csv(path)
    assert back.rows == rep.rows


def test_condition_a_csv(golden_torus, tmp_path):
    _, times = golden_torus
    path = tmp_path / "a.csv"
    write_condition_a_csv(path, times)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,r,t_i,ratio"
    assert len(lines) == len(times)
    assert float(lines[-1].split(",")[3]) == roth_condition_a(times)[len(times)]


def test_times_do_not_depend_on_orbit_reuse(L3):
    th = theta_from_slope(GOLDEN)
    orbit = DelaunayOrbit(L3, th)
    orbit.extend_to(200)
    assert roth_times(L3, th, 6, orbit=orbit).times == roth_times(L3, th, 6).times
