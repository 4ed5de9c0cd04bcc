import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatlab.errors import DomainError
from flatlab.genericity import alpha_t
from flatlab.group import (GroupElement, conjugated_rotation_factors, cos_diagonal, decomposition_identity,
                           geodesic, kak, lower_unipotent, rotation, upper_unipotent)


def test_constructors_match_matrices():
    t, th, a = 0.7, 0.4, 1.3
    assert np.allclose(geodesic(t).matrix(), [[math.exp(t), 0], [0, math.exp(-t)]])
    assert np.allclose(rotation(th).matrix(), [[math.cos(th), math.sin(th)], [-math.sin(th), math.cos(th)]])
    assert np.allclose(upper_unipotent(a).matrix(), [[1, a], [0, 1]])
    assert np.allclose(lower_unipotent(a).matrix(), [[1, 0], [a, 1]])
    c = math.cos(th)
    assert np.allclose(cos_diagonal(th).matrix(), [[c, 0], [0, 1 / c]])


def test_determinant_enforced():
    with pytest.raises(ValueError):
        GroupElement(2.0, 0.0, 0.0, 1.0)


@given(st.floats(1e-6, math.pi / 2 - 1e-6))
def test_decomposition_identity(xi):
    lower, diag, upper, residual = decomposition_identity(xi)
    assert residual <= 1e-12
    # exact factors: the product is a rotation with no rounding at all
    p = lower @ diag @ upper
    assert p.a == p.d and p.b == -p.c and p.a * p.a + p.b * p.b == 1


def test_decomposition_sweep_is_fast():
    import time
    t0 = time.perf_counter()
    worst = max(decomposition_identity(float(x))[3] for x in np.linspace(1e-6, math.pi / 2 - 1e-6, 10 ** 4))
    assert worst <= 1e-12
    assert time.perf_counter() - t0 < 5.0


def test_decomposition_near_zero_and_quarter_turn():
    parts = decomposition_identity(1e-9)
    assert all(p.distance(GroupElement(1.0, 0.0, 0.0, 1.0)) < 1e-8 for p in parts[:3])
    assert decomposition_identity(math.pi / 4)[3] <= 1e-12
    with pytest.raises(DomainError):
        decomposition_identity(math.pi / 2)


@given(st.floats(-3, 3), st.floats(0.01, 1.5))
def test_conjugated_rotation(t, xi):
    lower, diag, upper, g = conjugated_rotation_factors(t, xi)
    lhs = geodesic(t) @ rotation(xi)
    rhs = lower @ diag @ upper @ g
    assert np.max(np.abs(lhs.matrix() - rhs.matrix())) <= 1e-9 * max(1.0, lhs.norm())
    assert lower.c == pytest.approx(-math.exp(-2 * t) * math.tan(xi), rel=1e-12)


@given(st.floats(-2, 2), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_kak_round_trip(s, a, b):
    g = rotation(a) @ geodesic(s) @ rotation(b)
    phi1, s2, phi2 = kak(g)
    assert s2 == pytest.approx(abs(s), abs=1e-9)
    back = rotation(phi1) @ geodesic(s2) @ rotation(phi2)
    assert np.max(np.abs(back.matrix() - g.matrix())) <= 1e-9 * g.norm()


def test_norm_is_top_singular_value():
    g = rotation(0.3) @ geodesic(1.1) @ rotation(-0.8)
    assert g.norm() == pytest.approx(math.exp(1.1), rel=1e-12)


def test_alpha_t_examples():
    assert alpha_t(0.7, 0.0) == pytest.approx(math.atan(0.7), abs=1e-15)
    a = alpha_t(1.0, 1.0)
    assert a == pytest.approx(math.atan(math.exp(-2)), abs=1e-15)
    assert math.exp(2) * math.tan(a) == pytest.approx(1.0, abs=1e-12)
    vals = [alpha_t(0.5, t) for t in np.linspace(0, 10, 50)]
    assert all(b < a for a, b in zip(vals, vals[1:])) and vals[-1] < 1e-8


@given(st.floats(-5, 5), st.floats(0, 8))
def test_alpha_t_equation(alpha, t):
    a = alpha_t(alpha, t)
    assert math.exp(2 * t) * math.tan(a) == pytest.approx(alpha, abs=1e-12 * max(1.0, abs(alpha)))
