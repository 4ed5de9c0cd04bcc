"""Translation surfaces stored as labeled triangulations.

A surface is a set of triangles glued by translations. Edge ``e`` has two
half-edges: ``2e`` carries the holonomy ``vec[e]`` and ``2e + 1`` carries
``-vec[e]``. Faces are counter-clockwise triples of half-edges.

Homology is tracked with integer cochains on edges. Each labeled
combinatorial type has a canonical symplectic basis of ``H^1(M, Z)``. Delaunay
flips transport the old basis cochains, and the matrix of the transported
classes in the new canonical basis is the Kontsevich-Zorich cocycle step.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import (
    BadConeAngle,
    DegenerateTriangulation,
    MismatchedHolonomy,
    UnpairedEdge,
)
from .group import GroupElement
from .linalg import int_matmul, standard_symplectic, symplectic_reduction

FLOAT_TOL = 1e-12
FLIP_BUDGET = 200_000
TWIST_DETECT_AFTER = 512
FRAME_REDUCE_AT = 4.0


# ---------------------------------------------------------------- numbers

def to_number(value, exact: bool):
    """Coerce a coordinate to ``Fraction`` (exact mode) or ``float``."""
    if exact:
        return Fraction(value)
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def _is_exact_value(v) -> bool:
    return isinstance(v, (int, Fraction, str)) and not isinstance(v, bool)


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _int_matmul(a, b):
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def _apply_rows(m, vec, exact: bool):
    """Edge vectors ``m @ vec`` for an integer matrix ``m``. Float entries
    are summed exactly and rounded once, so equal inputs give bitwise equal
    outputs whatever the term order."""
    out = []
    for row in m:
        terms = [(c, v) for c, v in zip(row, vec) if c]
        if exact:
            out.append([sum(c * v[0] for c, v in terms), sum(c * v[1] for c, v in terms)])
        else:
            out.append([float(sum(c * Fraction(v[0]) for c, v in terms)),
                        float(sum(c * Fraction(v[1]) for c, v in terms))])
    return out


def _dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


def holonomy_key(v, exact: bool):
    """Lexicographic key of the edge direction with a canonical sign."""
    x, y = v
    if exact:
        if x < 0 or (x == 0 and y < 0):
            x, y = -x, -y
        return (x, y)
    eps = FLOAT_TOL * max(1.0, abs(x), abs(y))
    if x < -eps or (abs(x) <= eps and y < 0):
        x, y = -x, -y
    return (round(x, 9), round(y, 9))


class Stratum(NamedTuple):
    """Zero orders ``alpha`` (sorted descending, orders 0 dropped) and genus."""

    zeros: tuple
    genus: int

    def __str__(self):
        # the torus has no zeros; its stratum is written H(0)
        return "H(" + (", ".join(str(a) for a in self.zeros) or "0") + ")"


# ---------------------------------------------------------- triangulation

class _Triangulation:
    """Mutable labeled triangulation. Internal; users see TranslationSurface."""

    __slots__ = ("vec", "faces", "hface", "hpos", "exact", "shadow", "frame")

    def __init__(self, vec, faces, exact: bool):
        self.vec = [list(v) for v in vec]
        self.faces = [list(f) for f in faces]
        self.exact = exact
        # float copies of exact surfaces keep exact edge vectors ``shadow``
        # and a float matrix ``frame`` (a, b, c, d) with vec = frame @ shadow
        self.shadow = None
        self.frame = None
        n = 2 * len(self.vec)
        self.hface = [-1] * n
        self.hpos = [-1] * n
        for fi, f in enumerate(self.faces):
            for k, h in enumerate(f):
                self.hface[h] = fi
                self.hpos[h] = k

    def copy(self) -> "_Triangulation":
        t = object.__new__(_Triangulation)
        t.vec = [list(v) for v in self.vec]
        t.faces = [list(f) for f in self.faces]
        t.hface = list(self.hface)
        t.hpos = list(self.hpos)
        t.exact = self.exact
        t.shadow = None if self.shadow is None else [list(v) for v in self.shadow]
        t.frame = self.frame
        return t

    def to_float(self) -> "_Triangulation":
        """Float copy; an exact triangulation becomes the shadow of the copy."""
        t = self.copy()
        if self.exact:
            # integer shadow; the common denominator moves into the frame
            den = 1
            for x, y in self.vec:
                den = math.lcm(den, Fraction(x).denominator, Fraction(y).denominator)
            t.shadow = [[int(x * den), int(y * den)] for x, y in self.vec]
            t.frame = (1.0 / den, 0.0, 0.0, 1.0 / den)
        t.exact = False
        t.vec = [[float(x), float(y)] for x, y in self.vec]
        return t

    def _sync(self):
        a, b, c, d = self.frame
        self.vec = [[a * x + b * y, c * x + d * y] for x, y in self.shadow]

    def _reduce_frame(self):
        """Replace ``frame`` by ``frame @ gamma`` with ``gamma`` in SL(2, Z)
        so that its columns form a reduced basis; the shadow absorbs
        ``gamma^-1``. The surface is unchanged."""
        a, b, c, d = self.frame
        g = [1, 0, 0, 1]  # gamma as (p, q, r, s) acting on columns
        for _ in range(200):
            nu, nv = a * a + c * c, b * b + d * d
            if nu > nv:
                # (u, v) -> (v, -u) keeps the orientation
                a, b, c, d = b, -a, d, -c
                g = [g[1], -g[0], g[3], -g[2]]
                continue
            mu = round((a * b + c * d) / nu)
            if mu == 0:
                break
            b, d = b - mu * a, d - mu * c
            g = [g[0], g[1] - mu * g[0], g[2], g[3] - mu * g[2]]
        p, q, r, t = g
        self.shadow = [[t * x - q * y, -r * x + p * y] for x, y in self.shadow]
        self.frame = (a, b, c, d)

    def key(self) -> tuple:
        return tuple(h for f in self.faces for h in f)

    def hol(self, h):
        x, y = self.vec[h >> 1]
        return (-x, -y) if h & 1 else (x, y)

    def next(self, h):
        f = self.faces[self.hface[h]]
        return f[(self.hpos[h] + 1) % 3]

    def prev(self, h):
        f = self.faces[self.hface[h]]
        return f[(self.hpos[h] + 2) % 3]

    def apply(self, a, b, c, d):
        if self.shadow is None:
            self.vec = [[a * x + b * y, c * x + d * y] for x, y in self.vec]
            return
        p, q, r, t = self.frame
        self.frame = (a * p + b * r, a * q + b * t, c * p + d * r, c * q + d * t)
        if max(map(abs, self.frame)) > FRAME_REDUCE_AT:
            self._reduce_frame()
        self._sync()

    # -- Delaunay predicate -------------------------------------------------

    def _quad(self, e):
        h, t = 2 * e, 2 * e + 1
        f1, f2 = self.hface[h], self.hface[t]
        if f1 == f2:
            return None
        k1, k2 = self.hpos[h], self.hpos[t]
        F1, F2 = self.faces[f1], self.faces[f2]
        a, b = F1[(k1 + 1) % 3], F1[(k1 + 2) % 3]
        c, d = F2[(k2 + 1) % 3], F2[(k2 + 2) % 3]
        return f1, f2, a, b, c, d

    def flip_status(self, e, tol=FLOAT_TOL):
        """+1 if edge ``e`` must flip, -1 if locally Delaunay, 0 on a
        co-circular tie. Ties never flip, so flip sequences terminate."""
        q = self._quad(e)
        if q is None:
            return -1
        _, _, a, _, c, d = q
        qx, qy = self.vec[e]
        ax, ay = self.hol(a)
        rx, ry = qx + ax, qy + ay
        sx, sy = self.hol(c)
        # P = origin, incircle of (P, Q, R) against S
        adx, ady = -sx, -sy
        bdx, bdy = qx - sx, qy - sy
        cdx, cdy = rx - sx, ry - sy
        det = ((adx * adx + ady * ady) * (bdx * cdy - bdy * cdx)
               - (bdx * bdx + bdy * bdy) * (adx * cdy - ady * cdx)
               + (cdx * cdx + cdy * cdy) * (adx * bdy - ady * bdx))
        if self.exact:
            sign = (det > 0) - (det < 0)
        else:
            # rounding bound on the determinant (Shewchuk's permanent)
            perm = ((adx * adx + ady * ady) * (abs(bdx * cdy) + abs(bdy * cdx))
                    + (bdx * bdx + bdy * bdy) * (abs(adx * cdy) + abs(ady * cdx))
                    + (cdx * cdx + cdy * cdy) * (abs(adx * bdy) + abs(ady * bdx)))
            band = tol * perm
            sign = 1 if det > band else (-1 if det < -band else 0)
        if sign <= 0:
            return sign
        dx, dy = self.hol(d)
        nx, ny = dx + ax, dy + ay
        # both new triangles (S, R, P) and (R, S, Q) must be positively oriented
        o1 = _cross((nx, ny), (-rx, -ry))
        o2 = _cross((-nx, -ny), (qx - sx, qy - sy))
        if self.exact:
            return 1 if o1 > 0 and o2 > 0 else -1
        n_len = math.hypot(nx, ny)
        if (o1 <= tol * n_len * math.hypot(rx, ry)
                or o2 <= tol * n_len * math.hypot(qx - sx, qy - sy)):
            return -1
        return 1

    def flip(self, e, tracked=None):
        """Flip edge ``e``. ``tracked`` is a list of per-edge integer rows that
        are updated as closed cochains."""
        f1, f2, a, b, c, d = self._quad(e)
        dx, dy = self.hol(d)
        ax, ay = self.hol(a)
        if self.shadow is None:
            self.vec[e] = [dx + ax, dy + ay]
        else:
            sd = -1 if d & 1 else 1
            sa = -1 if a & 1 else 1
            u, w = self.shadow[d >> 1], self.shadow[a >> 1]
            v = [sd * u[0] + sa * w[0], sd * u[1] + sa * w[1]]
            self.shadow[e] = v
            fa, fb, fc, fd = self.frame
            self.vec[e] = [fa * v[0] + fb * v[1], fc * v[0] + fd * v[1]]
        h, t = 2 * e, 2 * e + 1
        self.faces[f1] = [h, b, c]
        self.faces[f2] = [t, d, a]
        for k, x in enumerate((h, b, c)):
            self.hface[x] = f1
            self.hpos[x] = k
        for k, x in enumerate((t, d, a)):
            self.hface[x] = f2
            self.hpos[x] = k
        if tracked is not None:
            rd, ra = tracked[d >> 1], tracked[a >> 1]
            sd = -1 if d & 1 else 1
            sa = -1 if a & 1 else 1
            tracked[e] = [sd * u + sa * v for u, v in zip(rd, ra)]

    def make_delaunay(self, tracked=None, budget: int = FLIP_BUDGET) -> int:
        """Flip to a Delaunay triangulation; returns the number of flips.

        Deep in a cusp a single flow step can need a number of flips of
        order ``1/systole**2``, each twisting one long edge around a thin
        cylinder. Once the face combinatorics repeat, the flips since the
        previous visit act linearly on the edge vectors and the loop jumps
        over as many repetitions as remain valid.
        """
        n = len(self.vec)
        stack = list(range(n - 1, -1, -1))
        queued = [True] * n
        flips = 0
        jumped = 0
        seen = None
        log = []
        while stack:
            e = stack.pop()
            queued[e] = False
            if self.flip_status(e) > 0:
                _, _, a, b, c, d = self._quad(e)
                self.flip(e, tracked)
                flips += 1
                if flips > budget:
                    raise DegenerateTriangulation(
                        f"no Delaunay triangulation reached after {budget} flips")
                for x in (a, b, c, d):
                    y = x >> 1
                    if not queued[y]:
                        queued[y] = True
                        stack.append(y)
                if flips >= TWIST_DETECT_AFTER:
                    if seen is None:
                        seen = {}
                    log.append((e, d, a))
                    sig = tuple(map(tuple, self.faces))
                    if sig in seen:
                        period = log[seen[sig]:]
                        jumped += len(period) * self._jump_twist(period, tracked)
                        seen, log = {}, []
                        for y in range(n):
                            if not queued[y]:
                                queued[y] = True
                                stack.append(y)
                    else:
                        seen[sig] = len(log)
        return flips + jumped

    def _jump_twist(self, period, tracked) -> int:
        """Apply the largest number ``k`` of further repetitions of the
        flip sequence ``period`` that keep every triangle positive and its
        first flip pending. Returns ``k``."""
        n = len(self.vec)
        m = [[int(i == j) for j in range(n)] for i in range(n)]
        for e, d, a in period:
            sd = -1 if d & 1 else 1
            sa = -1 if a & 1 else 1
            m[e] = [sd * u + sa * v for u, v in zip(m[d >> 1], m[a >> 1])]
        first = period[0][0]
        total = [[int(i == j) for j in range(n)] for i in range(n)]
        k = 0

        def attempt(p):
            old, old_shadow = self.vec, self.shadow
            if old_shadow is None:
                self.vec = _apply_rows(p, old, self.exact)
            else:
                self.shadow = _apply_rows(p, old_shadow, True)
                self._sync()
            if self._faces_positive() and self.flip_status(first) > 0:
                return True
            self.vec, self.shadow = old, old_shadow
            return False

        # doubling then binary descent; validity is monotone in k
        powers = [m]
        while len(powers) < 63 and attempt(powers[-1]):
            total = _int_matmul(powers[-1], total)
            k += 1 << (len(powers) - 1)
            powers.append(_int_matmul(powers[-1], powers[-1]))
        for j in range(len(powers) - 2, -1, -1):
            if attempt(powers[j]):
                total = _int_matmul(powers[j], total)
                k += 1 << j
        if k and tracked is not None:
            tracked[:] = [[sum(c * r[i] for c, r in zip(row, tracked) if c) for i in range(len(tracked[0]))]
                          for row in total]
        return k

    def _faces_positive(self) -> bool:
        for f in self.faces:
            if _cross(self.hol(f[0]), self.hol(f[1])) <= 0:
                return False
        return True

    def is_delaunay(self) -> bool:
        return all(self.flip_status(e) <= 0 for e in range(len(self.vec)))

    def min_edge_length(self) -> float:
        return min(math.hypot(float(x), float(y)) for x, y in self.vec)


# ------------------------------------------------------ combinatorial data

@dataclass(frozen=True)
class _Combinatorics:
    vertex_of: tuple          # half-edge -> vertex index of its start
    vertices: tuple           # vertex -> tuple of outgoing half-edges (rotation order)
    genus: int
    cochains: tuple           # E rows x 2g: canonical symplectic cocycle basis
    coord: tuple              # 2g rows x E: coordinates of a closed cochain


def _vertex_orbits(faces, n_half):
    hface, hpos = [0] * n_half, [0] * n_half
    for fi, f in enumerate(faces):
        for k, h in enumerate(f):
            hface[h] = fi
            hpos[h] = k
    vertex_of = [-1] * n_half
    vertices = []
    for h0 in range(n_half):
        if vertex_of[h0] >= 0:
            continue
        orbit = []
        h = h0
        while vertex_of[h] < 0:
            vertex_of[h] = len(vertices)
            orbit.append(h)
            p = faces[hface[h]][(hpos[h] + 2) % 3]
            h = p ^ 1
        vertices.append(tuple(orbit))
    return vertex_of, vertices, hface


@lru_cache(maxsize=100_000)
def _combinatorics(key: tuple) -> _Combinatorics:
    faces = [key[i:i + 3] for i in range(0, len(key), 3)]
    nf = len(faces)
    ne = len(key) // 2
    vertex_of, vertices, hface = _vertex_orbits(faces, 2 * ne)
    nv = len(vertices)
    chi = nv - ne + nf
    genus = (2 - chi) // 2

    # primal spanning tree with signed root paths
    adj = [[] for _ in range(nv)]
    for e in range(ne):
        u, w = vertex_of[2 * e], vertex_of[2 * e + 1]
        adj[u].append((w, e, 1))
        adj[w].append((u, e, -1))
    in_tree = [False] * ne
    path = [None] * nv
    path[0] = {}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for w, e, s in adj[u]:
            if path[w] is None:
                in_tree[e] = True
                p = dict(path[u])
                p[e] = p.get(e, 0) + s
                path[w] = p
                queue.append(w)

    # dual spanning tree on faces through non-tree edges
    parent_edge = [None] * nf
    seen = [False] * nf
    seen[0] = True
    order = [0]
    queue = deque([0])
    in_dual = [False] * ne
    while queue:
        f = queue.popleft()
        for h in faces[f]:
            e = h >> 1
            if in_tree[e] or in_dual[e]:
                continue
            g = hface[h ^ 1]
            if not seen[g]:
                seen[g] = True
                in_dual[e] = True
                parent_edge[g] = e
                order.append(g)
                queue.append(g)
    leftover = [e for e in range(ne) if not in_tree[e] and not in_dual[e]]
    if len(leftover) != 2 * genus:
        raise DegenerateTriangulation("tree-cotree decomposition failed")

    # one closed cochain per leftover edge, zero on the primal tree
    basis = []
    for l in leftover:
        val = [0] * ne
        val[l] = 1
        for f in reversed(order[1:]):
            e = parent_edge[f]
            s_e, rest = 0, 0
            for h in faces[f]:
                s = -1 if h & 1 else 1
                if h >> 1 == e:
                    s_e += s
                else:
                    rest += s * val[h >> 1]
            val[e] = -rest // s_e
        basis.append(val)

    n2 = 2 * genus
    omega2 = [[0] * n2 for _ in range(n2)]
    for f in faces:
        s = [-1 if h & 1 else 1 for h in f]
        for i in range(n2):
            bi = basis[i]
            a0, a1 = s[0] * bi[f[0] >> 1], s[1] * bi[f[1] >> 1]
            for j in range(i + 1, n2):
                bj = basis[j]
                b0, b1 = s[0] * bj[f[0] >> 1], s[1] * bj[f[1] >> 1]
                omega2[i][j] += a0 * b1 - a1 * b0
    omega = [[0] * n2 for _ in range(n2)]
    for i in range(n2):
        for j in range(i + 1, n2):
            omega[i][j] = omega2[i][j] // 2
            omega[j][i] = -omega[i][j]

    if n2:
        p = symplectic_reduction(omega)
        j_std = standard_symplectic(n2).tolist()
        pt = [list(r) for r in zip(*p)]
        p_inv = [[-x for x in row] for row in int_matmul(int_matmul(j_std, pt), omega)]
    else:
        p, p_inv = [], []

    # y = Y c: values on leftover edges after gauging c to vanish on the tree
    y = []
    for l in leftover:
        row = [0] * ne
        row[l] += 1
        head, tail = vertex_of[2 * l + 1], vertex_of[2 * l]
        for e, s in path[head].items():
            row[e] -= s
        for e, s in path[tail].items():
            row[e] += s
        y.append(row)
    coord = int_matmul(p_inv, y) if n2 else []
    cochains = [[sum(basis[i][e] * p[i][j] for i in range(n2)) for j in range(n2)] for e in range(ne)]
    return _Combinatorics(
        vertex_of=tuple(vertex_of),
        vertices=tuple(vertices),
        genus=genus,
        cochains=tuple(tuple(r) for r in cochains),
        coord=tuple(tuple(r) for r in coord),
    )


@dataclass(frozen=True)
class HomologyFrame:
    """Canonical integer basis for one labeled triangulation.

    ``basis`` rows are integer edge chains (2g x E); they are cycles and
    ``basis @ c`` gives the coordinates of a closed cochain ``c``.
    ``cochains`` holds the dual cocycles (E x 2g) with cup-product matrix
    ``intersection_matrix``.
    """

    basis: np.ndarray
    cochains: np.ndarray
    intersection_matrix: np.ndarray


# ----------------------------------------------------------------- surface

class TranslationSurface:
    """Immutable translation surface with polygon description and triangulation."""

    def __init__(self, tri: _Triangulation, polygons=None, gluings=None, name: Optional[str] = None):
        self._tri = tri
        if polygons is None:
            polygons, gluings = _triangles_as_polygons(tri)
        self.polygons = tuple(tuple(tuple(p) for p in poly) for poly in polygons)
        self.gluings = tuple((tuple(a), tuple(b)) for a, b in gluings)
        self.name = name

    # basic data
    @property
    def exact(self) -> bool:
        return self._tri.exact

    @property
    def n_edges(self) -> int:
        return len(self._tri.vec)

    @property
    def faces(self) -> tuple:
        return tuple(tuple(f) for f in self._tri.faces)

    def holonomies(self) -> np.ndarray:
        return np.array([[float(x), float(y)] for x, y in self._tri.vec])

    @property
    def combinatorics(self) -> _Combinatorics:
        return _combinatorics(self._tri.key())

    @property
    def genus(self) -> int:
        return self.combinatorics.genus

    def cone_angles(self) -> list:
        """Total angle at each vertex, in radians."""
        return _cone_angles(self._tri, self.combinatorics.vertices)

    @property
    def stratum(self) -> Stratum:
        orders = [int(round(a / (2 * math.pi))) - 1 for a in self.cone_angles()]
        return Stratum(tuple(sorted((o for o in orders if o > 0), reverse=True)), self.genus)

    @property
    def frame(self) -> HomologyFrame:
        c = self.combinatorics
        n2 = 2 * c.genus
        return HomologyFrame(
            basis=np.array(c.coord, dtype=object).reshape(n2, self.n_edges),
            cochains=np.array(c.cochains, dtype=object).reshape(self.n_edges, n2),
            intersection_matrix=standard_symplectic(n2) if n2 else np.zeros((0, 0), dtype=np.int64),
        )

    def is_delaunay(self) -> bool:
        return self._tri.is_delaunay()

    def same_as(self, other: "TranslationSurface", tol: float = 0.0) -> bool:
        """Same labeled triangulation with holonomies equal within ``tol``."""
        if self.faces != other.faces:
            return False
        return all(abs(float(a) - float(b)) <= tol
                   for u, v in zip(self._tri.vec, other._tri.vec) for a, b in zip(u, v))

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"<TranslationSurface{label} {self.stratum} area={float(area(self)):.6g} exact={self.exact}>"


def _cone_angles(tri, vertices):
    out = []
    for orbit in vertices:
        total = 0.0
        for h in orbit:
            u = tri.hol(h)
            px, py = tri.hol(tri.prev(h))
            u = (float(u[0]), float(u[1]))
            w = (-float(px), -float(py))
            total += math.atan2(_cross(u, w), _dot(u, w))
        out.append(total)
    return out


def _triangles_as_polygons(tri):
    polygons = []
    for f in tri.faces:
        p0 = (0, 0) if tri.exact else (0.0, 0.0)
        h0, h1 = tri.hol(f[0]), tri.hol(f[1])
        p1 = (p0[0] + h0[0], p0[1] + h0[1])
        p2 = (p1[0] + h1[0], p1[1] + h1[1])
        polygons.append((p0, p1, p2))
    gluings = []
    for e in range(len(tri.vec)):
        a, b = 2 * e, 2 * e + 1
        gluings.append(((tri.hface[a], tri.hpos[a]), (tri.hface[b], tri.hpos[b])))
    return polygons, gluings


# ----------------------------------------------------------- construction

def _ear_clip(points, exact):
    """Triangulate a simple ccw polygon; returns triangles of vertex indices."""
    idx = list(range(len(points)))
    tris = []

    def inside(p, a, b, c):
        return _cross((b[0] - a[0], b[1] - a[1]), (p[0] - a[0], p[1] - a[1])) >= 0 and \
            _cross((c[0] - b[0], c[1] - b[1]), (p[0] - b[0], p[1] - b[1])) >= 0 and \
            _cross((a[0] - c[0], a[1] - c[1]), (p[0] - c[0], p[1] - c[1])) >= 0

    while len(idx) > 3:
        m = len(idx)
        for k in range(m):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
            a, b, c = points[i0], points[i1], points[i2]
            turn = _cross((b[0] - a[0], b[1] - a[1]), (c[0] - b[0], c[1] - b[1]))
            if (turn <= 0) if exact else (turn <= FLOAT_TOL):
                continue
            if any(inside(points[j], a, b, c) for j in idx if j not in (i0, i1, i2)):
                continue
            tris.append((i0, i1, i2))
            del idx[k]
            break
        else:
            raise ValueError("polygon is not simple or not counter-clockwise")
    tris.append(tuple(idx))
    return tris


def build_from_polygons(polygons: Sequence, gluings: Sequence, exact: Optional[bool] = None,
                        name: Optional[str] = None) -> TranslationSurface:
    """Glue polygons into a validated translation surface.

    ``polygons`` are counter-clockwise vertex lists. Side ``i`` of a polygon
    runs from vertex ``i`` to vertex ``i + 1``. ``gluings`` pairs sides as
    ``((p, i), (q, j))``; paired sides must have opposite holonomy.
    Coordinates may be ints, ``Fraction`` or ``"p/q"`` strings (exact mode) or
    floats. ``exact=None`` picks exact mode when every coordinate is exact.
    """
    if exact is None:
        exact = all(_is_exact_value(c) for poly in polygons for pt in poly for c in pt)
    pts = [[(to_number(x, exact), to_number(y, exact)) for x, y in poly] for poly in polygons]
    for k, poly in enumerate(pts):
        if len(poly) < 3:
            raise ValueError(f"polygon {k} has fewer than 3 vertices")
        twice_area = sum(_cross(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly)))
        if twice_area <= 0:
            raise ValueError(f"polygon {k} is not counter-clockwise")

    sides = {(p, i) for p, poly in enumerate(pts) for i in range(len(poly))}
    partner = {}
    for pair in gluings:
        (p, i), (q, j) = (tuple(pair[0]), tuple(pair[1]))
        for s in ((p, i), (q, j)):
            if s not in sides:
                raise UnpairedEdge(f"gluing refers to missing side {s}")
            if s in partner:
                raise UnpairedEdge(f"side {s} is glued more than once")
        if (p, i) == (q, j):
            raise UnpairedEdge(f"side {(p, i)} is glued to itself")
        partner[(p, i)] = (q, j)
        partner[(q, j)] = (p, i)
    missing = sorted(sides - set(partner))
    if missing:
        raise UnpairedEdge(f"sides without a partner: {missing}")

    def side_vec(p, i):
        poly = pts[p]
        a, b = poly[i], poly[(i + 1) % len(poly)]
        return (b[0] - a[0], b[1] - a[1])

    half_of = {}
    vec = []
    for k, pair in enumerate(gluings):
        s, t = tuple(pair[0]), tuple(pair[1])
        u, w = side_vec(*s), side_vec(*t)
        if exact:
            bad = u[0] + w[0] != 0 or u[1] + w[1] != 0
        else:
            scale = max(1.0, abs(u[0]), abs(u[1]))
            bad = abs(u[0] + w[0]) > FLOAT_TOL * scale or abs(u[1] + w[1]) > FLOAT_TOL * scale
        if bad:
            raise MismatchedHolonomy(f"sides {s} and {t} have holonomy {u} and {w}")
        half_of[s] = 2 * k
        half_of[t] = 2 * k + 1
        vec.append(u)

    faces = []
    for p, poly in enumerate(pts):
        n = len(poly)
        diag = {}
        for tri in _ear_clip(poly, exact):
            face = []
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                if (a + 1) % n == b:
                    face.append(half_of[(p, a)])
                elif (a, b) in diag:
                    face.append(diag[(a, b)])
                else:
                    e = len(vec)
                    vec.append((poly[b][0] - poly[a][0], poly[b][1] - poly[a][1]))
                    diag[(b, a)] = 2 * e + 1
                    face.append(2 * e)
            faces.append(face)

    tri = _Triangulation(vec, faces, exact)
    surface = TranslationSurface(tri, pts, [(tuple(a), tuple(b)) for a, b in gluings], name=name)
    _validate(surface)
    return surface


def _validate(surface: TranslationSurface):
    tri = surface._tri
    comb = surface.combinatorics
    for f in tri.faces:
        h0, h1 = tri.hol(f[0]), tri.hol(f[1])
        if _cross(h0, h1) <= 0:
            raise DegenerateTriangulation("triangle with non-positive area")
    total = 0
    for ang in _cone_angles(tri, comb.vertices):
        m = ang / (2 * math.pi)
        if round(m) < 1 or abs(m - round(m)) > 1e-9 * max(1.0, m):
            raise BadConeAngle(f"cone angle {ang!r} is not a positive multiple of 2*pi")
        total += round(m) - 1
    if total != 2 * comb.genus - 2:
        raise BadConeAngle(f"zero orders sum to {total}, expected {2 * comb.genus - 2}")


def origami(r: Sequence[int], u: Sequence[int], name: Optional[str] = None) -> TranslationSurface:
    """Square-tiled surface: square ``i`` has ``r[i]`` on its right and ``u[i]`` above it."""
    n = len(r)
    if sorted(r) != list(range(n)) or sorted(u) != list(range(n)):
        raise ValueError("r and u must be permutations of range(n)")
    polygons = [[(0, 0), (1, 0), (1, 1), (0, 1)] for _ in range(n)]
    gluings = []
    for i in range(n):
        gluings.append(((i, 1), (r[i], 3)))
        gluings.append(((i, 2), (u[i], 0)))
    return build_from_polygons(polygons, gluings, exact=True, name=name)


# --------------------------------------------------------------- actions

def _as_entries(g):
    if isinstance(g, GroupElement):
        return g.a, g.b, g.c, g.d
    m = np.asarray(g, dtype=object)
    return m[0, 0], m[0, 1], m[1, 0], m[1, 1]


def apply(g, S: TranslationSurface) -> TranslationSurface:
    """The linear action of ``g`` on every polygon and edge.

    Exact surfaces stay exact when ``g`` has rational entries."""
    a, b, c, d = _as_entries(g)
    exact = S.exact and all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in (a, b, c, d))
    if not exact:
        a, b, c, d = (float(x) for x in (a, b, c, d))
    tri = S._tri.copy() if exact else S._tri.to_float()
    tri.apply(a, b, c, d)

    def conv(v):
        return v if exact else float(v)

    polygons = [[(a * conv(x) + b * conv(y), c * conv(x) + d * conv(y)) for x, y in poly] for poly in S.polygons]
    return TranslationSurface(tri, polygons, S.gluings, name=S.name)


def area(S: TranslationSurface):
    """Total area by the shoelace formula on the polygons."""
    total = 0
    for poly in S.polygons:
        n = len(poly)
        total += sum(_cross(poly[i], poly[(i + 1) % n]) for i in range(n))
    return total / 2 if S.exact else float(total) / 2.0


def geodesic_normalize(S: TranslationSurface):
    """Delaunay-reduce ``S`` and return the integer action on cohomology.

    Returns ``(S_reduced, X)``: ``X`` maps coordinates of a class in the
    canonical basis of ``S`` to its coordinates in the canonical basis of
    ``S_reduced``. ``X^T J X = J`` with ``J`` the standard form.
    """
    tri = S._tri.copy()
    comb = S.combinatorics
    n2 = 2 * comb.genus
    tracked = [list(r) for r in comb.cochains]
    flips = tri.make_delaunay(tracked)
    if flips == 0:
        return S, np.eye(n2, dtype=object) if n2 else np.zeros((0, 0), dtype=object)
    reduced = TranslationSurface(tri, name=S.name)
    x = int_matmul(reduced.combinatorics.coord, tracked)
    return reduced, np.array(x, dtype=object).reshape(n2, n2)


def normalize_in_place(tri: _Triangulation):
    """Delaunay-reduce ``tri`` in place; returns the cocycle step as int rows."""
    comb = _combinatorics(tri.key())
    tracked = [list(r) for r in comb.cochains]
    if tri.make_delaunay(tracked) == 0:
        return None
    return int_matmul(_combinatorics(tri.key()).coord, tracked)


def cohomology_coordinates(S: TranslationSurface, cochain) -> np.ndarray:
    """Coordinates of a closed cochain (per-edge values) in the canonical basis."""
    return np.array(int_matmul(S.combinatorics.coord, [[v] for v in cochain]), dtype=object).ravel()


def period_coordinates(S: TranslationSurface) -> np.ndarray:
    """Real and imaginary parts of ``omega`` in the canonical basis (2 x 2g)."""
    coord = np.array(S.combinatorics.coord, dtype=float).reshape(-1, S.n_edges)
    return S.holonomies().T @ coord.T


# --------------------------------------------------------------- file I/O

FORMAT_NAME = "flatlab-surface"


def _encode(v, exact):
    if exact:
        f = Fraction(v)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return float(v)


def surface_to_dict(S: TranslationSurface) -> dict:
    out = {
        "format": FORMAT_NAME,
        "version": 1,
        "exact": S.exact,
        "polygons": [[[_encode(x, S.exact), _encode(y, S.exact)] for x, y in poly] for poly in S.polygons],
        "gluings": [[list(a), list(b)] for a, b in S.gluings],
    }
    if S.name:
        out["name"] = S.name
    return out


def surface_from_dict(data: dict) -> TranslationSurface:
    if data.get("format", FORMAT_NAME) != FORMAT_NAME:
        raise ValueError(f"unknown surface format {data.get('format')!r}")
    exact = data.get("exact")
    polygons = [[tuple(pt) for pt in poly] for poly in data["polygons"]]
    gluings = [(tuple(a), tuple(b)) for a, b in data["gluings"]]
    return build_from_polygons(polygons, gluings, exact=exact, name=data.get("name"))


def save_surface(S: TranslationSurface, path) -> None:
    import json
    with open(path, "w") as fh:
        json.dump(surface_to_dict(S), fh, indent=1)
        fh.write("\n")


def load_surface(path) -> TranslationSurface:
    """Load a surface file (JSON or YAML) and validate it."""
    import yaml  # YAML is a superset of JSON
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return surface_from_dict(data)
