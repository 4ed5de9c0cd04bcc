import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatlab.builtins import SURFACES, builtin_surface
from flatlab.errors import MismatchedHolonomy, UnpairedEdge
from flatlab.flow import GeodesicFlow
from flatlab.group import GroupElement, geodesic, rotation
from flatlab.linalg import int_det, standard_symplectic, symplectic_defect
from flatlab.saddles import saddle_connections, systole
from flatlab.surface import (apply, area, build_from_polygons, geodesic_normalize, load_surface, origami,
                             save_surface, surface_from_dict, surface_to_dict)

SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]
FIB = {1, 2}
_a, _b = 1, 2
while _b < 10 ** 12:
    _a, _b = _b, _a + _b
    FIB.add(_b)


def _vertices(S):
    return np.array([[float(x), float(y)] for poly in S.polygons for x, y in poly])


def sl2(draw_t, draw_a, draw_b):
    return rotation(draw_a) @ geodesic(draw_t) @ rotation(draw_b)


group_elements = st.builds(sl2, st.floats(-2, 2), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))


# ------------------------------------------------------------ construction

def test_square_torus():
    S = build_from_polygons([SQUARE], [((0, 0), (0, 2)), ((0, 1), (0, 3))])
    assert S.genus == 1
    assert S.stratum.zeros == ()
    assert area(S) == 1
    assert S.exact


def test_l_shaped_origami_is_genus_two():
    S = origami([1, 0, 2], [2, 1, 0])
    assert S.genus == 2
    assert S.stratum.zeros == (2,)
    assert area(S) == 3


def test_builtin_strata():
    expect = {"torus": (), "L3": (2,), "L4": (2,), "wollmilchsau": (1, 1, 1, 1)}
    for name, zeros in expect.items():
        S = builtin_surface(name)
        assert S.stratum.zeros == zeros
        assert sum(zeros) == 2 * S.genus - 2


def test_unpaired_edge():
    with pytest.raises(UnpairedEdge):
        build_from_polygons([SQUARE], [((0, 1), (0, 3))])


def test_mismatched_holonomy():
    rect = [(0, 0), (2, 0), (2, 1), (0, 1)]
    with pytest.raises(MismatchedHolonomy):
        build_from_polygons([rect], [((0, 0), (0, 1)), ((0, 2), (0, 3))])


def test_rational_string_coordinates():
    half = [(0, 0), ("1/2", 0), ("1/2", 2), (0, 2)]
    S = build_from_polygons([half], [((0, 0), (0, 2)), ((0, 1), (0, 3))])
    assert S.exact and area(S) == 1


# ----------------------------------------------------------------- action

def test_apply_identity_and_full_turn(L3):
    assert apply(GroupElement(1, 0, 0, 1), L3).same_as(L3)
    turned = apply(rotation(2 * math.pi), L3)
    assert np.max(np.abs(_vertices(turned) - _vertices(L3))) <= 1e-12


def test_geodesic_on_torus_gives_rectangle(torus):
    S = apply(geodesic(math.log(2)), torus)
    v = _vertices(S)
    assert np.allclose(sorted(set(np.round(v[:, 0], 12))), [0, 2])
    assert np.allclose(sorted(set(np.round(v[:, 1], 12))), [0, 0.5])


def test_rational_action_stays_exact(L3):
    S = apply([[Fraction(2), Fraction(1)], [Fraction(1), Fraction(1)]], L3)
    assert S.exact and area(S) == 3


@given(group_elements, st.sampled_from(sorted(SURFACES)))
def test_area_invariant(g, name):
    S = builtin_surface(name)
    assert abs(area(apply(g, S)) - float(area(S))) <= 1e-12 * float(area(S))


@given(group_elements, group_elements)
def test_action_composes(g, h):
    S = builtin_surface("L3")
    lhs = _vertices(apply(g, apply(h, S)))
    rhs = _vertices(apply(g @ h, S))
    assert np.max(np.abs(lhs - rhs)) <= 1e-10 * max(1.0, np.max(np.abs(rhs)))


# ---------------------------------------------------------------- systole

def test_systoles(torus, L3):
    assert systole(torus) == pytest.approx(1.0, abs=1e-12)
    assert systole(apply(geodesic(1.0), torus)) == pytest.approx(math.exp(-1), rel=1e-12)
    assert systole(L3) == pytest.approx(1.0, abs=1e-12)


def test_torus_saddle_connections_are_primitive_vectors(torus):
    # oracle: primitive integer vectors in the disk, both orientations
    R = 6.5
    want = sum(1 for a in range(-7, 8) for b in range(-7, 8)
               if (a, b) != (0, 0) and math.gcd(a, b) == 1 and a * a + b * b <= R * R)
    assert len(saddle_connections(torus, R)) == want


def test_saddle_connections_rotate_with_surface(L3):
    # rotating the surface rotates the connection set; counts must match
    R = 3.0
    n0 = len(saddle_connections(L3, R))
    n1 = len(saddle_connections(apply(rotation(0.37), L3), R))
    assert n0 == n1


# ---------------------------------------------------------- normalization

def test_normalize_fixed_point(L3):
    S, X = geodesic_normalize(L3)
    assert S is L3
    assert np.array_equal(X.astype(int), np.eye(4, dtype=int))


def test_golden_torus_cocycle_has_fibonacci_entries(torus):
    phi = (1 + 5 ** 0.5) / 2
    # lattice spanned by the eigenvectors of [[2, 1], [1, 1]]: g_{2 log phi} maps it to itself
    P = np.array([[1, -1], [phi - 1, phi]])
    S = apply(GroupElement.from_matrix(np.linalg.inv(P) * 5 ** 0.25), torus)
    S, _ = geodesic_normalize(S)
    total = np.eye(2, dtype=object)
    for k in range(1, 8):
        S, X = geodesic_normalize(apply(geodesic(2 * math.log(phi)), S))
        total = X.dot(total)
        entries = {abs(int(x)) for x in total.ravel()}
        assert entries <= FIB | {0}
        assert max(entries) >= phi ** (2 * k - 1)


@given(group_elements, st.sampled_from(["torus", "L3", "L4", "wollmilchsau"]))
def test_normalize_is_symplectic(g, name):
    S0 = builtin_surface(name)
    S, X = geodesic_normalize(apply(g, S0))
    assert S.is_delaunay()
    m = [[int(x) for x in row] for row in X]
    assert symplectic_defect(m, standard_symplectic(len(m)).tolist()) == 0
    assert int_det(m) == 1


def test_float_copy_of_lattice_surface_keeps_integer_shadow(L3):
    flow = GeodesicFlow(L3, 0.9, 0.5)
    for _ in range(200):
        flow.step()
    tri = flow.tri
    a, b, c, d = tri.frame
    assert all(isinstance(x, int) for v in tri.shadow for x in v)
    for (x, y), (p, q) in zip(tri.vec, tri.shadow):
        assert x == pytest.approx(a * p + b * q, abs=1e-9)
        assert y == pytest.approx(c * p + d * q, abs=1e-9)
    assert abs(a * d - b * c) == pytest.approx(1.0, rel=1e-9)


# ---------------------------------------------------------------- file I/O

@pytest.mark.parametrize("name", sorted(SURFACES))
def test_builtins_round_trip(name, tmp_path):
    S = builtin_surface(name)
    path = tmp_path / f"{name}.json"
    save_surface(S, path)
    back = load_surface(path)
    assert back.same_as(S) and back.stratum == S.stratum and back.name == name


def test_float_surface_round_trip(L3):
    S = apply(rotation(0.3), L3)
    back = surface_from_dict(surface_to_dict(S))
    # polygons survive exactly; edge vectors are re-derived from them
    assert back.polygons == S.polygons
    assert back.same_as(S, tol=1e-12)
    assert not back.exact
