"""Interval exchange transformations: first return maps and Rauzy-Veech induction.

Transition matrices follow the column convention ``lengths_old = M @ lengths_new``.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import NoReturn, SingularityHit, ZeroLength
from .lyapunov import CocycleStream
from .surface import TranslationSurface, _Triangulation

FLOAT_TOL = 1e-12
MAX_CROSSINGS = 1_000_000


def _exact(x) -> bool:
    return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


@dataclass(frozen=True)
class IET:
    """Lengths indexed by label ``0..n-1``; ``top`` and ``bottom`` list the
    labels in the order of the intervals before and after the exchange."""

    lengths: tuple
    top: tuple
    bottom: tuple

    def __post_init__(self):
        n = len(self.lengths)
        object.__setattr__(self, "lengths", tuple(self.lengths))
        object.__setattr__(self, "top", tuple(int(a) for a in self.top))
        object.__setattr__(self, "bottom", tuple(int(a) for a in self.bottom))
        if sorted(self.top) != list(range(n)) or sorted(self.bottom) != list(range(n)):
            raise ValueError("top and bottom must both order all labels")
        if any(x <= 0 for x in self.lengths):
            raise ValueError("lengths must be positive")
        for k in range(1, n):
            if set(self.top[:k]) == set(self.bottom[:k]):
                raise ValueError(f"permutation is reducible at prefix {k}")

    @classmethod
    def rotation(cls, a, b) -> "IET":
        """Two intervals of lengths ``a``, ``b`` swapped."""
        return cls((a, b), (0, 1), (1, 0))

    @property
    def n(self) -> int:
        return len(self.lengths)

    @property
    def exact(self) -> bool:
        return all(_exact(x) for x in self.lengths)

    @property
    def total(self):
        return sum(self.lengths)

    def _starts(self, order):
        out, acc = {}, 0
        for a in order:
            out[a] = acc
            acc = acc + self.lengths[a]
        return out

    def discontinuities(self) -> list:
        """Interior endpoints of the top partition."""
        starts = self._starts(self.top)
        return [starts[a] for a in self.top[1:]]

    def translations(self) -> dict:
        top, bot = self._starts(self.top), self._starts(self.bottom)
        return {a: bot[a] - top[a] for a in range(self.n)}

    def __call__(self, x):
        starts = [self._starts(self.top)[a] for a in self.top]
        k = bisect.bisect_right(starts, x) - 1
        if k < 0 or x >= self.total:
            raise ValueError(f"point {x} outside [0, {self.total})")
        return x + self.translations()[self.top[k]]

    def matrix_permutation(self) -> np.ndarray:
        """Intersection-type matrix ``Omega`` of the permutation."""
        n = self.n
        pt = {a: i for i, a in enumerate(self.top)}
        pb = {a: i for i, a in enumerate(self.bottom)}
        om = np.zeros((n, n), dtype=np.int64)
        for a in range(n):
            for b in range(n):
                if pt[a] < pt[b] and pb[a] > pb[b]:
                    om[a, b] = 1
                elif pt[a] > pt[b] and pb[a] < pb[b]:
                    om[a, b] = -1
        return om


def _equal(a, b, exact: bool) -> bool:
    if exact:
        return a == b
    return abs(a - b) <= FLOAT_TOL * max(abs(a), abs(b))


def rauzy_step(iet: IET):
    """One Rauzy-Veech step. Returns ``(IET, M, "top" | "bottom")``.

    The longer of the two last intervals wins; ``M`` satisfies
    ``lengths_old = M @ lengths_new``.
    """
    alpha, beta = iet.top[-1], iet.bottom[-1]
    la, lb = iet.lengths[alpha], iet.lengths[beta]
    if iet.n < 2 or _equal(la, lb, iet.exact):
        raise ZeroLength("last top and bottom intervals have equal length")
    lengths = list(iet.lengths)
    m = np.eye(iet.n, dtype=np.int64)
    if la > lb:
        lengths[alpha] = la - lb
        bottom = list(iet.bottom[:-1])
        bottom.insert(bottom.index(alpha) + 1, beta)
        m[alpha, beta] = 1
        return IET(tuple(lengths), iet.top, tuple(bottom)), m, "top"
    lengths[beta] = lb - la
    top = list(iet.top[:-1])
    top.insert(top.index(beta) + 1, alpha)
    m[beta, alpha] = 1
    return IET(tuple(lengths), tuple(top), iet.bottom), m, "bottom"


def _step_type(iet: IET):
    la, lb = iet.lengths[iet.top[-1]], iet.lengths[iet.bottom[-1]]
    if _equal(la, lb, iet.exact):
        return None
    return "top" if la > lb else "bottom"


def zorich_accelerate(iet: IET):
    """Group consecutive Rauzy steps of the same type.

    Returns ``(IET, M, count)`` with ``M`` the product of the grouped step
    matrices. The group also ends when the next step would be degenerate.
    """
    cur, m, kind = rauzy_step(iet)
    count = 1
    while _step_type(cur) == kind:
        cur, mk, _ = rauzy_step(cur)
        m = m @ mk
        count += 1
    return cur, m, count


def keane_check(iet: IET, depth: int) -> bool:
    """False if some discontinuity reaches a discontinuity within ``depth``
    iterates (tolerance 1e-12 for floats, exact for rationals)."""
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if iet.n < 2:
        return False
    exact = iet.exact
    disc = sorted(iet.discontinuities())
    starts = [iet._starts(iet.top)[a] for a in iet.top]
    trans = iet.translations()
    shift = [trans[a] for a in iet.top]
    total = iet.total
    tol = 0 if exact else FLOAT_TOL * float(total)
    for u in disc:
        x = u
        for _ in range(depth):
            k = bisect.bisect_right(starts, x + tol) - 1
            x = x + shift[k]
            if not exact:
                x = min(max(x, 0.0), float(total))
            j = bisect.bisect_left(disc, x - tol)
            if j < len(disc) and abs(disc[j] - x) <= tol:
                return False
    return True


# ------------------------------------------------------- first return map

def theta_from_slope(slope: float) -> float:
    """Angle ``theta`` whose vertical flow on ``r_theta S`` is the flow of
    direction ``(slope, 1)`` on ``S``."""
    return -math.atan(slope)


def flow_direction(theta: float):
    """Direction on ``S`` of the vertical flow of ``r_theta S``."""
    return (-math.sin(theta), math.cos(theta))


class _Transversal:
    """Union of horizontal half-edges with the face above them."""

    def __init__(self, tri: _Triangulation, halfedges: Optional[Sequence[int]] = None):
        if halfedges is None:
            halfedges = [h for h in range(2 * len(tri.vec))
                         if tri.hol(h)[1] == 0 and tri.hol(h)[0] > 0]
        if not halfedges:
            raise ValueError("surface has no horizontal edges to use as transversal")
        self.halfedges = list(halfedges)
        self.base = {}
        acc = 0.0
        for h in self.halfedges:
            x, y = tri.hol(h)
            if abs(float(y)) > FLOAT_TOL or float(x) <= 0:
                raise ValueError(f"half-edge {h} is not horizontal and rightward")
            self.base[h] = acc
            acc += float(x)
        self.total = acc
        self.starts = [self.base[h] for h in self.halfedges]

    def locate(self, x: float):
        k = bisect.bisect_right(self.starts, x) - 1
        h = self.halfedges[k]
        return h, x - self.base[h]


class _Walker:
    def __init__(self, tri: _Triangulation):
        self.tri = tri
        self.corners = []
        for f in tri.faces:
            p0 = (0.0, 0.0)
            h0, h1 = tri.hol(f[0]), tri.hol(f[1])
            p1 = (float(h0[0]), float(h0[1]))
            p2 = (p1[0] + float(h1[0]), p1[1] + float(h1[1]))
            self.corners.append((p0, p1, p2))

    def run(self, face, p, entry, v, hit, max_crossings=MAX_CROSSINGS):
        """Move from ``p`` in ``face`` along ``v`` until ``hit(o)`` is true for
        the exit half-edge ``o``. Returns ``(o, u)`` with ``u`` the exit
        parameter along ``o``."""
        tri = self.tri
        vx, vy = v
        for _ in range(max_crossings):
            pts = self.corners[face]
            best = None
            for k in range(3):
                if k == entry:
                    continue
                ax, ay = pts[k]
                bx, by = pts[(k + 1) % 3]
                dx, dy = bx - ax, by - ay
                den = vx * dy - vy * dx
                if den <= 0:
                    continue
                s = ((ax - p[0]) * dy - (ay - p[1]) * dx) / den
                if best is None or s < best[0]:
                    u = ((p[0] - ax) * vy - (p[1] - ay) * vx) / (dx * vy - dy * vx)
                    best = (s, k, u)
            if best is None:
                raise SingularityHit("flow line is stuck at a vertex")
            s, k, u = best
            if u < 1e-11 or u > 1 - 1e-11:
                raise SingularityHit("flow line runs into a singularity")
            o = tri.faces[face][k]
            if hit(o):
                return o, u
            t = o ^ 1
            g = tri.hface[t]
            j = tri.hpos[t]
            st = self.corners[g][j]
            hx, hy = tri.hol(t)
            p = (st[0] + (1 - u) * float(hx), st[1] + (1 - u) * float(hy))
            face, entry = g, j
        raise NoReturn(f"no return after {max_crossings} triangle crossings")


def _start_on(tri, walker, trans, x):
    h, off = trans.locate(x)
    length = float(tri.hol(h)[0])
    u = off / length
    f, k = tri.hface[h], tri.hpos[h]
    st = walker.corners[f][k]
    return f, (st[0] + u * length, st[1]), k


def first_return_point(S: TranslationSurface, theta: float, x: float, transversal=None) -> float:
    """Direct integration of the flow from transversal position ``x`` back to
    the transversal (the oracle for ``first_return_iet``)."""
    tri = S._tri
    trans = _Transversal(tri, transversal)
    walker = _Walker(tri)
    v = flow_direction(theta)
    if v[1] <= 0:
        raise ValueError("flow must cross the transversal upward (cos theta > 0)")
    f, p, k = _start_on(tri, walker, trans, x)
    tset = set(trans.halfedges)
    o, u = walker.run(f, p, k, v, lambda o: (o ^ 1) in tset)
    t = o ^ 1
    return trans.base[t] + (1 - u) * float(tri.hol(t)[0])


def first_return_iet(S: TranslationSurface, theta: float, transversal=None) -> IET:
    """First return map of the vertical flow of ``r_theta S`` to a horizontal
    transversal of ``S`` (by default all horizontal edges with the face above,
    concatenated and parameterized by length)."""
    tri = S._tri
    trans = _Transversal(tri, transversal)
    walker = _Walker(tri)
    v = flow_direction(theta)
    if v[1] <= FLOAT_TOL:
        raise ValueError("flow must cross the transversal upward (cos theta > 0)")
    tset = set(trans.halfedges)
    back = (-v[0], -v[1])
    cuts = set(trans.starts)
    # backward separatrices from every corner
    for f, face in enumerate(tri.faces):
        for k in range(3):
            ux, uy = tri.hol(face[k])
            px, py = tri.hol(face[(k + 2) % 3])
            u = (float(ux), float(uy))
            w = (-float(px), -float(py))
            if u[0] * back[1] - u[1] * back[0] <= 0 or back[0] * w[1] - back[1] * w[0] <= 0:
                continue
            try:
                o, s = _leave_corner(walker, f, k, back, tset)
                if o is None:
                    o, s = walker.run(*s, back, lambda o: o in tset)
            except SingularityHit:
                continue  # the separatrix is a saddle connection
            cuts.add(trans.base[o] + s * float(tri.hol(o)[0]))
    cuts = sorted(cuts)
    merged = []
    for c in cuts:
        if not merged or c - merged[-1] > 1e-12 * trans.total:
            merged.append(c)
    edges = merged + [trans.total]
    pieces = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = (lo + hi) / 2
        pieces.append([lo, hi, first_return_point(S, theta, mid, trans.halfedges) - mid])
    groups = []
    for lo, hi, shift in pieces:
        if groups and abs(groups[-1][2] - shift) < 1e-9 * max(1.0, trans.total):
            groups[-1][1] = hi
        else:
            groups.append([lo, hi, shift])
    lengths = tuple(hi - lo for lo, hi, _ in groups)
    images = [lo + shift for lo, _, shift in groups]
    bottom = tuple(int(i) for i in np.argsort(images, kind="stable"))
    return IET(lengths, tuple(range(len(groups))), bottom)


def _leave_corner(walker, f, k, v, tset):
    """Cross the side opposite corner ``k`` of face ``f`` moving along ``v``."""
    tri = walker.tri
    pts = walker.corners[f]
    side = (k + 1) % 3
    ax, ay = pts[side]
    bx, by = pts[(side + 1) % 3]
    px, py = pts[k]
    vx, vy = v
    dx, dy = bx - ax, by - ay
    u = ((px - ax) * vy - (py - ay) * vx) / (dx * vy - dy * vx)
    if u < 1e-11 or u > 1 - 1e-11:
        raise SingularityHit("separatrix hits a vertex")
    o = tri.faces[f][side]
    if o in tset:
        return o, u
    t = o ^ 1
    g, j = tri.hface[t], tri.hpos[t]
    st = walker.corners[g][j]
    hx, hy = tri.hol(t)
    return None, (g, (st[0] + (1 - u) * float(hx), st[1] + (1 - u) * float(hy)), j)


# ---------------------------------------------------------- Rauzy stream

def _image_basis(om: np.ndarray):
    """Columns of ``om`` forming a basis of its image (greedy, exact rank)."""
    cols = []
    for j in range(om.shape[1]):
        trial = cols + [j]
        if np.linalg.matrix_rank(om[:, trial].astype(float)) == len(trial):
            cols = trial
    return om[:, cols].astype(float)


def rauzy_stream(S: TranslationSurface, theta: float, T: float, transversal=None,
                 label: str = "", iet: Optional[IET] = None) -> CocycleStream:
    """Cocycle stream from Zorich-accelerated Rauzy-Veech induction.

    Time is ``log(total_0 / total)``. Elements are transposed Zorich
    matrices; when the permutation's ``Omega`` is degenerate they are
    restricted to its image, the copy of absolute cohomology.
    """
    from .kernels import rauzy_zorich_run

    if iet is None:
        th = math.remainder(theta, math.pi)
        if th <= -math.pi / 2 + 1e-15:
            th += math.pi
        iet = first_return_iet(S, th, transversal)
    dim = 2 * S.genus
    n = iet.n
    lengths = np.array([float(x) for x in iet.lengths])
    top = np.array(iet.top, dtype=np.int64)
    bottom = np.array(iet.bottom, dtype=np.int64)
    mats, times, _, perms = rauzy_zorich_run(lengths, top, bottom, float(T))
    stream = CocycleStream(dim, float(T), backend="rauzy", label=label)
    restrict = n != dim
    cache = {}

    def basis_for(pt, pb):
        key = (tuple(pt), tuple(pb))
        if key not in cache:
            om = IET(tuple([1.0] * n), key[0], key[1]).matrix_permutation()
            cache[key] = _image_basis(om)
        return cache[key]

    for idx in range(mats.shape[0]):
        mt = mats[idx].T
        if restrict:
            b_old = basis_for(*perms[idx])
            b_new = basis_for(*perms[idx + 1])
            r, *_ = np.linalg.lstsq(b_new, mt @ b_old, rcond=None)
            stream.append(times[idx], r)
        else:
            stream.append(times[idx], [[int(x) for x in row] for row in mt])
    return stream
