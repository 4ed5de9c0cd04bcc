"""Saddle connections by unfolding triangles around each corner."""
from __future__ import annotations

import math

import numpy as np

from .errors import SearchRadiusExceeded
from .surface import TranslationSurface, _Triangulation

RADIUS_CAP_FACTOR = 2 ** 20
COLLINEAR_TOL = 1e-9


def _float_tri(tri: _Triangulation) -> _Triangulation:
    return tri.to_float()


def _segment_distance(ax, ay, bx, by):
    """Distance from the origin to segment AB."""
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    s = 0.0 if den == 0 else min(1.0, max(0.0, -(ax * dx + ay * dy) / den))
    return math.hypot(ax + s * dx, ay + s * dy)


def _enumerate(tri: _Triangulation, radius: float):
    r_in = radius * (1 + 1e-12)
    out = []
    hol = tri.hol
    faces, hface, hpos = tri.faces, tri.hface, tri.hpos
    for f in faces:
        for k in range(3):
            h = f[k]
            ux, uy = hol(h)
            if math.hypot(ux, uy) <= r_in:
                out.append((ux, uy))
            px, py = hol(f[(k + 2) % 3])
            wx, wy = -px, -py
            # opposite side runs from u to w; unfold across it
            stack = [(f[(k + 1) % 3], ux, uy, wx, wy, ux, uy, wx, wy)]
            while stack:
                o, ax, ay, bx, by, lx, ly, hx, hy = stack.pop()
                if _segment_distance(ax, ay, bx, by) > r_in:
                    continue
                t = o ^ 1
                g = faces[hface[t]]
                p = hpos[t]
                n1, n2 = g[(p + 1) % 3], g[(p + 2) % 3]
                n1x, n1y = hol(n1)
                cx, cy = ax + n1x, ay + n1y
                left = lx * cy - ly * cx      # C is ccw of the low ray
                right = cx * hy - cy * hx     # C is cw of the high ray
                # a vertex on a ray sits behind the vertex that defined it
                rc = math.hypot(cx, cy)
                left -= COLLINEAR_TOL * rc * math.hypot(lx, ly)
                right -= COLLINEAR_TOL * rc * math.hypot(hx, hy)
                if left > 0 and right > 0:
                    if rc <= r_in:
                        out.append((cx, cy))
                    stack.append((n1, ax, ay, cx, cy, lx, ly, cx, cy))
                    stack.append((n2, cx, cy, bx, by, cx, cy, hx, hy))
                elif left <= 0:
                    stack.append((n2, cx, cy, bx, by, lx, ly, hx, hy))
                else:
                    stack.append((n1, ax, ay, cx, cy, lx, ly, hx, hy))
    return np.array(out, dtype=float).reshape(-1, 2)


def saddle_connections(S: TranslationSurface, radius: float) -> np.ndarray:
    """Holonomies of all oriented saddle connections with length <= radius.

    Each unoriented connection appears twice, once per orientation.
    Vertices of cone angle 2*pi count as endpoints.
    """
    return _enumerate(_float_tri(S._tri), float(radius))


def min_altitude(tri: _Triangulation) -> float:
    """Lower bound for the systole: no saddle connection leaves a triangle
    corner without crossing the opposite side."""
    best = math.inf
    for f in tri.faces:
        hs = [tri.hol(h) for h in f]
        twice_area = abs(float(hs[0][0]) * float(hs[1][1]) - float(hs[0][1]) * float(hs[1][0]))
        for x, y in hs:
            best = min(best, twice_area / math.hypot(float(x), float(y)))
    return best


def systole(S: TranslationSurface) -> float:
    """Length of the shortest saddle connection.

    The search runs on the Delaunay-reduced surface, starting at the
    altitude lower bound and doubling the radius until a connection shows up.
    """
    from .surface import geodesic_normalize

    tri = _float_tri(geodesic_normalize(S)[0]._tri)
    lower = min_altitude(tri)
    radius = lower
    while radius <= RADIUS_CAP_FACTOR * lower:
        found = _enumerate(tri, radius)
        if len(found):
            return float(np.min(np.hypot(found[:, 0], found[:, 1])))
        radius *= 2
    raise SearchRadiusExceeded(f"no saddle connection within {RADIUS_CAP_FACTOR} x {lower:.3g}")


def delaunay_systole(tri: _Triangulation) -> float:
    """Shortest edge of a Delaunay triangulation, equal to the systole."""
    return tri.min_edge_length()


class LinearImageSystole:
    """Systole of ``L . S`` for many linear maps ``L`` from one enumeration.

    Connections of ``S`` up to ``radius`` are cached. For a given ``L``, the
    shortest image among cached vectors ``m`` is exact whenever
    ``||L^-1|| m <= radius``; otherwise the caller gets ``None``.
    """

    def __init__(self, S: TranslationSurface, radius: float):
        self.radius = float(radius)
        v = saddle_connections(S, radius)
        # keep one orientation per connection
        keep = (v[:, 0] > 0) | ((v[:, 0] == 0) & (v[:, 1] > 0))
        self.vectors = v[keep]

    def __call__(self, m: np.ndarray):
        m = np.asarray(m, dtype=float)
        img = self.vectors @ m.T
        best = float(np.min(np.hypot(img[:, 0], img[:, 1])))
        inv_norm = np.linalg.norm(np.linalg.inv(m), 2)
        if inv_norm * best > self.radius:
            return None
        return best
