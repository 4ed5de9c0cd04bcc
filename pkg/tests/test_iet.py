import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatlab.builtins import builtin_surface
from flatlab.errors import ZeroLength
from flatlab.iet import (IET, first_return_iet, first_return_point, keane_check, rauzy_step, theta_from_slope,
                         zorich_accelerate)

GOLDEN = (5 ** 0.5 - 1) / 2


def test_torus_slope_gives_rotation(torus):
    I = first_return_iet(torus, theta_from_slope(0.3))
    assert I.top == (0, 1) and I.bottom == (1, 0)
    assert I.lengths == pytest.approx((0.7, 0.3), abs=1e-12)


def test_torus_vertical_is_identity(torus):
    I = first_return_iet(torus, 0.0)
    assert I.n == 1 and I.lengths == pytest.approx((1.0,))


def test_golden_direction_on_l_shape(L3):
    I = first_return_iet(L3, theta_from_slope(GOLDEN))
    assert I.n == 4
    assert float(I.total) == pytest.approx(3.0, abs=1e-12)


@pytest.mark.parametrize("name,slope", [("L3", GOLDEN), ("L4", 2 ** 0.5 - 1), ("wollmilchsau", 0.2718)])
def test_return_map_matches_flow(name, slope):
    S = builtin_surface(name)
    th = theta_from_slope(slope)
    I = first_return_iet(S, th)
    xs = np.random.default_rng(1).uniform(0, float(I.total), 100)
    assert max(abs(I(x) - first_return_point(S, th, x)) for x in xs) <= 1e-9


def test_rauzy_step_example():
    J, M, kind = rauzy_step(IET((0.7, 0.3), (0, 1), (1, 0)))
    assert kind == "bottom"
    assert J.lengths == pytest.approx((0.4, 0.3))
    assert M.tolist() == [[1, 1], [0, 1]]


def test_rauzy_equal_lengths():
    with pytest.raises(ZeroLength):
        rauzy_step(IET((Fraction(1, 2), Fraction(1, 2)), (0, 1), (1, 0)))


def test_golden_rotation_gives_fibonacci():
    I = IET((1.0, GOLDEN), (0, 1), (1, 0))
    P = np.eye(2, dtype=np.int64)
    for _ in range(20):
        I, M, _ = rauzy_step(I)
        P = P @ M
    fib = [1, 1]  # fib[k] = F_{k+1}
    while len(fib) < 30:
        fib.append(fib[-1] + fib[-2])
    assert sorted(P.ravel().tolist()) == sorted([fib[18], fib[19], fib[19], fib[20]])


def test_zorich_counts():
    J, M, count = zorich_accelerate(IET((Fraction(9, 10), Fraction(1, 10)), (0, 1), (1, 0)))
    assert count == 8 and M.tolist() == [[1, 8], [0, 1]]
    eps = 0.01
    assert zorich_accelerate(IET((0.5 + eps, 0.5 - eps), (0, 1), (1, 0)))[2] == 1


def test_keane():
    assert not keane_check(IET.rotation(Fraction(2, 3), Fraction(1, 3)), 3)
    assert keane_check(IET.rotation(1.0, GOLDEN), 10 ** 4)
    assert not keane_check(IET((1.0,), (0,), (0,)), 5)


# exact-mode 4-interval exchanges with the H(2) permutation
rationals = st.fractions(min_value=Fraction(1, 50), max_value=Fraction(3), max_denominator=97)


@given(st.lists(rationals, min_size=4, max_size=4))
def test_step_identity_and_unimodular(lengths):
    I = IET(tuple(lengths), (0, 1, 2, 3), (3, 2, 1, 0))
    for _ in range(6):
        try:
            J, M, _ = rauzy_step(I)
        except ZeroLength:
            return
        old = [sum(int(M[i, j]) * J.lengths[j] for j in range(4)) for i in range(4)]
        assert old == list(I.lengths)
        assert round(abs(np.linalg.det(M.astype(float)))) == 1
        assert J.total < I.total
        I = J


@given(st.lists(rationals, min_size=4, max_size=4))
def test_zorich_is_product_of_rauzy(lengths):
    I = IET(tuple(lengths), (0, 1, 2, 3), (3, 2, 1, 0))
    try:
        J, M, count = zorich_accelerate(I)
    except ZeroLength:
        return
    K, P = I, np.eye(4, dtype=np.int64)
    for _ in range(count):
        K, Mk, _ = rauzy_step(K)
        P = P @ Mk
    assert K == J and np.array_equal(P, M)


def test_reducible_permutation_rejected():
    with pytest.raises(ValueError):
        IET((0.3, 0.3, 0.4), (0, 1, 2), (1, 0, 2))


def test_flow_must_cross_upward(torus):
    with pytest.raises(ValueError):
        first_return_iet(torus, math.pi)
