"""Wind-tree billiard: the plane minus the rectangles ``[0,a] x [0,b] + Z^2``.

Trajectories are integrated event by event in the compiled kernel (or its
pure-Python twin); positions are stored as integer cell plus fractional
offset so long runs keep full precision near the obstacles.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, CornerHit

MAX_EVENTS = 10 ** 10


@dataclass(frozen=True)
class WindTreeConfig:
    a: float
    b: float

    def __post_init__(self):
        if not (0 < self.a < 1 and 0 < self.b < 1):
            raise ConfigError(f"scatterer sides must lie in (0, 1), got ({self.a}, {self.b})")

    def free_point(self):
        """A point in the free region, centred in the gap above and to the
        right of the obstacle at the origin."""
        return (0.5 * (1 + self.a), 0.5 * (1 + self.b))

    def contains(self, x: float, y: float) -> bool:
        """True if ``(x, y)`` is in the open interior of an obstacle."""
        fx, fy = x - math.floor(x), y - math.floor(y)
        return 0 < fx < self.a and 0 < fy < self.b


@dataclass
class BilliardState:
    position: np.ndarray
    direction: np.ndarray
    time: float
    collisions: int

    def distance_from(self, p) -> float:
        return float(np.hypot(*(self.position - np.asarray(p, dtype=float))))


def _direction(theta: float):
    return math.cos(theta), math.sin(theta)


def flow_windtree(config: WindTreeConfig, p, theta: Optional[float] = None, T: float = 1.0,
                  direction=None, max_events: int = MAX_EVENTS) -> BilliardState:
    """Position and direction after time ``T`` at unit speed from ``p``.

    The direction is ``(cos theta, sin theta)`` unless ``direction`` is
    given. Raises ``CornerHit`` on a corner and ``StepBudgetExceeded`` past
    ``max_events`` wall events.
    """
    vx, vy = direction if direction is not None else _direction(theta)
    state, _, _ = kernels.windtree_run(config.a, config.b, float(p[0]), float(p[1]), float(vx), float(vy),
                                       np.array([float(T)]), max_events, 0)
    return BilliardState(state[:2].copy(), state[2:4].copy(), float(state[4]), int(state[5]))


def collision_points(config: WindTreeConfig, p, theta: float, T: float, n: int) -> np.ndarray:
    """First ``n`` collision points of the trajectory (``n x 2``)."""
    vx, vy = _direction(theta)
    _, _, hits = kernels.windtree_run(config.a, config.b, float(p[0]), float(p[1]), vx, vy,
                                      np.array([float(T)]), MAX_EVENTS, n)
    return hits


def checkpoint_table(config: WindTreeConfig, p, theta: float, checkpoints: Sequence[float]) -> np.ndarray:
    """Rows ``(T, displacement, running_max, collisions)`` per checkpoint."""
    cps = np.asarray(checkpoints, dtype=float)
    if np.any(np.diff(cps) <= 0) or cps[0] <= 0:
        raise ValueError("checkpoints must be positive and increasing")
    vx, vy = _direction(theta)
    _, table, _ = kernels.windtree_run(config.a, config.b, float(p[0]), float(p[1]), vx, vy, cps, MAX_EVENTS, 0)
    return np.column_stack([cps, table])


def geometric_checkpoints(t_min: float = 100.0, t_max: float = 1e6, per_decade: int = 8) -> np.ndarray:
    n = int(round(per_decade * math.log10(t_max / t_min))) + 1
    return np.geomspace(t_min, t_max, n)


@dataclass
class DiffusionResult:
    """Per-direction slopes of ``log running_max`` against ``log T`` and
    their aggregate. ``thetas`` lists the directions actually used (after
    corner resampling)."""

    config: WindTreeConfig
    thetas: np.ndarray
    slopes: np.ndarray
    tables: List[np.ndarray]
    resampled: int

    @property
    def slope(self) -> float:
        return float(np.mean(self.slopes))

    @property
    def spread(self) -> float:
        return float(np.std(self.slopes, ddof=1)) if len(self.slopes) > 1 else 0.0


def envelope_slope(table: np.ndarray, fit_from: float = 1e3) -> float:
    """Least-squares slope of ``log running_max`` vs ``log T`` for
    ``T >= fit_from``; the running maximum stands in for the limsup."""
    t, rmax = table[:, 0], table[:, 2]
    sel = t >= fit_from
    if sel.sum() < 2:
        sel = np.ones_like(t, dtype=bool)
    return float(np.polyfit(np.log(t[sel]), np.log(rmax[sel]), 1)[0])


def diffusion_exponent(config: WindTreeConfig, p, thetas: Sequence[float], checkpoints: Sequence[float],
                       fit_from: float = 1e3, seed: int = 0, max_resamples: int = 10) -> DiffusionResult:
    """Fit the displacement growth exponent for each direction.

    A trajectory that hits a corner is discarded and its direction replaced
    by a fresh uniform draw from ``numpy.random.default_rng(seed)``.
    """
    rng = np.random.default_rng(seed)
    used, slopes, tables = [], [], []
    resampled = 0
    for theta in thetas:
        for attempt in range(max_resamples + 1):
            try:
                table = checkpoint_table(config, p, theta, checkpoints)
                break
            except CornerHit:
                if attempt == max_resamples:
                    raise
                resampled += 1
                theta = float(rng.uniform(0, 2 * math.pi))
        used.append(theta)
        tables.append(table)
        slopes.append(envelope_slope(table, fit_from))
    return DiffusionResult(config, np.array(used), np.array(slopes), tables, resampled)


WINDTREE_COLUMNS = ["a", "b", "theta", "T", "displacement", "running_max", "collisions"]


def write_windtree_csv(path, result: DiffusionResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WINDTREE_COLUMNS)
        for theta, table in zip(result.thetas, result.tables):
            for t, d, m, c in table:
                w.writerow([repr(result.config.a), repr(result.config.b), repr(float(theta)), repr(float(t)),
                            repr(float(d)), repr(float(m)), int(c)])
