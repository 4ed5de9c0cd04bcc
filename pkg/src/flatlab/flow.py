"""Teichmueller geodesic flow on a surface, renormalized step by step."""
from __future__ import annotations

import math
from typing import Optional

from .group import rotation
from .lyapunov import CocycleStream
from .surface import TranslationSurface, _Triangulation, normalize_in_place

DEFAULT_DT = 0.5
MAX_DT = 1.0


def _float_copy(tri: _Triangulation) -> _Triangulation:
    return tri.to_float()


class GeodesicFlow:
    """``g_t r_theta S`` sampled on the grid ``t = k dt``.

    After each step the triangulation is Delaunay-reduced in place and the
    integer cohomology action of that reduction is returned. The rotated
    starting surface is reduced once at construction; that matrix is kept in
    ``initial`` and is not part of the cocycle.
    """

    def __init__(self, S: TranslationSurface, theta: float, dt: float = DEFAULT_DT, tri: Optional[_Triangulation] = None):
        if not 0 < dt <= MAX_DT:
            raise ValueError(f"step {dt} outside (0, {MAX_DT}]")
        self.dt = dt
        self.theta = theta
        self.dim = 2 * S.genus
        if tri is None:
            tri = _float_copy(S._tri)
            r = rotation(theta)
            tri.apply(r.a, r.b, r.c, r.d)
            self.initial = normalize_in_place(tri)
        else:
            self.initial = None
        self.tri = tri
        self.t = 0.0
        self._e = math.exp(dt)

    def step(self, dt: Optional[float] = None):
        """Advance one step; returns the cocycle matrix (int rows) or ``None``
        when the triangulation did not change."""
        if dt is None:
            e = self._e
            dt = self.dt
        else:
            if not 0 < dt <= MAX_DT:
                raise ValueError(f"step {dt} outside (0, {MAX_DT}]")
            e = math.exp(dt)
        self.tri.apply(e, 0.0, 0.0, 1.0 / e)
        self.t += dt
        return normalize_in_place(self.tri)

    def fork(self) -> "GeodesicFlow":
        other = object.__new__(GeodesicFlow)
        other.__dict__.update(self.__dict__)
        other.tri = self.tri.copy()
        return other

    def surface(self) -> TranslationSurface:
        return TranslationSurface(self.tri.copy())

    def systole(self) -> float:
        """Shortest edge of the current Delaunay triangulation."""
        return self.tri.min_edge_length()


def delaunay_stream(S: TranslationSurface, theta: float, T: float, dt: float = DEFAULT_DT,
                    label: str = "") -> CocycleStream:
    """Cocycle matrices of the normalized flow up to time ``T``."""
    flow = GeodesicFlow(S, theta, dt)
    stream = CocycleStream(flow.dim, float(T), backend="delaunay", label=label)
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a multiple of dt")
    for _ in range(n):
        m = flow.step()
        if m is not None:
            stream.append(flow.t, m)
    return stream


def flowed_systole(S: TranslationSurface, theta: float, t: float, dt: float = DEFAULT_DT) -> float:
    """Systole of ``g_t r_theta S`` through step-wise renormalization."""
    flow = GeodesicFlow(S, theta, dt)
    n = int(t // dt)
    for _ in range(n):
        flow.step()
    rest = t - n * dt
    if rest > 1e-15:
        flow.step(rest)
    return flow.systole()


def linear_image_systole(tri: _Triangulation, a, b, c, d) -> float:
    """Systole of ``L . tri`` for a linear map ``L`` (copies ``tri``)."""
    t = tri.copy()
    t.apply(a, b, c, d)
    t.make_delaunay()
    return t.min_edge_length()
