"""Random walks on SL(2,R) driven by a bi-rotation-invariant step law, and
the orbit statistics measured along them: stationarity defect, drift of
the saddle-connection height function, visits to the thin part and
tracking by a single geodesic ray.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import mpmath
import numpy as np

from .errors import InvalidMeasure
from .flow import _float_copy
from .genericity import TestFunction
from .group import GroupElement, geodesic, rotation
from .lyapunov import CocycleStream
from .saddles import _enumerate
from .surface import TranslationSurface, _Triangulation, normalize_in_place

S_MAX_LIMIT = 2.0
DEFAULT_N_MC = 8
TRACKING_MIN_STEPS = 100


# ----------------------------------------------------------------- measure

@dataclass(frozen=True)
class WalkMeasure:
    """Step law ``r(phi1) diag(e^s, e^-s) r(phi2)`` with ``phi1, phi2``
    uniform and ``s`` drawn from a piecewise-linear density on
    ``[knots[0], knots[-1]]``. The density is renormalized to mass one."""

    knots: tuple
    values: tuple

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if k.ndim != 1 or k.shape != v.shape:
            raise InvalidMeasure("knots and values must be 1-d of equal length")
        if len(k) < 2:
            raise InvalidMeasure("a single knot is a point mass, not a density")
        if not np.all(np.isfinite(k)) or not np.all(np.isfinite(v)):
            raise InvalidMeasure("density table must be finite")
        if k[0] < 0 or np.any(np.diff(k) <= 0):
            raise InvalidMeasure("knots must be nonnegative and strictly increasing")
        if k[-1] > S_MAX_LIMIT:
            raise InvalidMeasure(f"support end {k[-1]} exceeds {S_MAX_LIMIT}")
        if np.any(v < 0):
            raise InvalidMeasure("density must be nonnegative")
        mass = float(np.sum(np.diff(k) * (v[1:] + v[:-1]) / 2))
        if mass <= 0:
            raise InvalidMeasure("density has zero mass")
        object.__setattr__(self, "knots", tuple(float(x) for x in k))
        object.__setattr__(self, "values", tuple(float(x) / mass for x in v))

    @classmethod
    def default(cls, n_knots: int = 201) -> "WalkMeasure":
        """Density proportional to ``s exp(-4 s)`` on ``[0, 1]``."""
        s = np.linspace(0.0, 1.0, n_knots)
        return cls(tuple(s), tuple(s * np.exp(-4 * s)))

    @property
    def s_max(self) -> float:
        return self.knots[-1]

    def _arrays(self):
        k = np.asarray(self.knots)
        v = np.asarray(self.values)
        cdf = np.concatenate([[0.0], np.cumsum(np.diff(k) * (v[1:] + v[:-1]) / 2)])
        return k, v, cdf

    def density(self, s):
        return np.interp(s, self.knots, self.values, left=0.0, right=0.0)

    def cdf(self, s):
        k, v, c = self._arrays()
        s = np.clip(np.asarray(s, dtype=float), k[0], k[-1])
        i = np.clip(np.searchsorted(k, s, side="right") - 1, 0, len(k) - 2)
        x = s - k[i]
        w = k[i + 1] - k[i]
        return c[i] + v[i] * x + (v[i + 1] - v[i]) * x * x / (2 * w)

    def quantile(self, u):
        """Inverse CDF; exact on each linear piece."""
        k, v, c = self._arrays()
        u = np.asarray(u, dtype=float) * c[-1]
        i = np.clip(np.searchsorted(c, u, side="right") - 1, 0, len(k) - 2)
        r = u - c[i]
        w = k[i + 1] - k[i]
        slope = (v[i + 1] - v[i]) / w
        disc = np.maximum(v[i] ** 2 + 2 * slope * r, 0.0)
        denom = v[i] + np.sqrt(disc)
        # root of v x + slope x^2 / 2 = r in its cancellation-free form
        x = np.where(denom > 0, 2 * r / np.where(denom > 0, denom, 1.0), 0.0)
        return np.clip(k[i] + np.minimum(x, w), k[0], k[-1])

    def expect(self, fn, order: int = 8) -> float:
        """``E fn(s)`` by Gauss-Legendre on each piece (exact for
        polynomials of degree < 2 order - 1)."""
        xg, wg = np.polynomial.legendre.leggauss(order)
        k = np.asarray(self.knots)
        total = 0.0
        for a, b in zip(k[:-1], k[1:]):
            s = (a + b) / 2 + (b - a) / 2 * xg
            total += float(np.sum(wg * fn(s) * self.density(s))) * (b - a) / 2
        return total

    def mean(self) -> float:
        return self.expect(lambda s: s)

    def lyapunov_exponent(self) -> float:
        """Top exponent of the matrix walk. For a step law invariant under
        rotations on both sides, ``E log||g v||`` is the same for every unit
        ``v`` and equals ``E log cosh s``."""
        return self.expect(lambda s: np.log(np.cosh(s)))


def sample_step(measure: WalkMeasure, rng: np.random.Generator) -> GroupElement:
    phi1, phi2 = rng.uniform(0.0, 2 * math.pi, 2)
    s = float(measure.quantile(rng.uniform()))
    return rotation(phi1) @ geodesic(s) @ rotation(phi2)


def sample_steps(measure: WalkMeasure, n: int, rng: np.random.Generator) -> List[GroupElement]:
    """``n`` steps; same stream consumption as ``n`` calls of ``sample_step``."""
    return [sample_step(measure, rng) for _ in range(n)]


# ------------------------------------------------------------------- walk

def _streams(seed: int):
    """Independent generators for the steps and for Monte Carlo averages."""
    steps, mc = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(steps), np.random.default_rng(mc)


@dataclass
class WalkTrajectory:
    """``x_k = g_k ... g_1 x_0`` for ``k = 0..n``.

    ``states`` are Delaunay float triangulations (empty when the walk was
    run without a surface); ``stream`` holds the cohomology cocycle with
    time stamp ``k`` for step ``k``.
    """

    seed: int
    measure: WalkMeasure
    steps: List[GroupElement]
    states: List[_Triangulation] = field(default_factory=list)
    stream: Optional[CocycleStream] = None
    surface_name: str = ""

    @property
    def n(self) -> int:
        return len(self.steps)

    def mc_rng(self) -> np.random.Generator:
        return _streams(self.seed)[1]


def walk(measure: WalkMeasure, S: Optional[TranslationSurface], n: int, seed: int) -> WalkTrajectory:
    """Run ``n`` steps from ``S``. With ``S=None`` only the matrices are drawn."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng, _ = _streams(seed)
    steps = sample_steps(measure, n, rng)
    traj = WalkTrajectory(seed, measure, steps)
    if S is None:
        return traj
    tri = _float_copy(S._tri)
    normalize_in_place(tri)
    traj.surface_name = S.name or ""
    traj.states.append(tri.copy())
    traj.stream = CocycleStream(2 * S.genus, float(n), backend="walk", label=traj.surface_name)
    for k, g in enumerate(steps, start=1):
        tri.apply(g.a, g.b, g.c, g.d)
        m = normalize_in_place(tri)
        if m is not None:
            traj.stream.append(float(k), m)
        traj.states.append(tri.copy())
    return traj


# ---------------------------------------------------------- stationarity

def _inner_values(traj: WalkTrajectory, phi: TestFunction, n_mc: int, n_states: int):
    """``phi(x_k)`` and the Monte Carlo mean of ``phi(h x_k)`` for the first
    ``n_states`` states, with one set of ``h`` shared by all ``k``."""
    rng = traj.mc_rng()
    hs = sample_steps(traj.measure, n_mc, rng)
    own = np.empty(n_states)
    pushed = np.empty(n_states)
    for k in range(n_states):
        x = traj.states[k]
        own[k] = phi(x)
        pushed[k] = sum(phi.at(x, h) for h in hs) / n_mc
    return own, pushed


def stationarity_curve(traj: WalkTrajectory, phi: TestFunction, Ns: Sequence[int],
                       n_mc: int = DEFAULT_N_MC) -> np.ndarray:
    """``|mean_k<N phi(x_k) - mean_k<N E_h phi(h x_k)|`` for each ``N``."""
    if not traj.states:
        raise ValueError("trajectory has no surface states")
    Ns = [int(N) for N in Ns]
    if min(Ns) < 1 or max(Ns) > len(traj.states):
        raise ValueError(f"N must lie in [1, {len(traj.states)}]")
    own, pushed = _inner_values(traj, phi, n_mc, max(Ns))
    diff = np.cumsum(own - pushed)
    return np.array([abs(diff[N - 1]) / N for N in Ns])


def stationarity_defect(traj: WalkTrajectory, phi: TestFunction, measure: Optional[WalkMeasure] = None,
                        n_mc: int = DEFAULT_N_MC, N: Optional[int] = None) -> float:
    """Stationarity defect over the first ``N`` states (default: all).

    The inner expectation uses ``n_mc`` steps from the trajectory's own
    Monte Carlo stream, shared across ``k`` (common random numbers).
    """
    if measure is not None and measure != traj.measure:
        raise ValueError("measure differs from the one that drove the walk")
    N = len(traj.states) if N is None else N
    return float(stationarity_curve(traj, phi, [N], n_mc)[0])


# ------------------------------------------------------ height function

@dataclass(frozen=True)
class HeightFunction:
    """``f_delta(x) = sum |v|^-(1 + delta)`` over saddle connections with
    ``|v| <= cutoff``, each connection counted once (not per orientation)."""

    delta: float = 0.2
    cutoff: float = 1.0

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")

    def from_vectors(self, v: np.ndarray) -> float:
        if len(v) == 0:
            return 0.0
        r = np.hypot(v[:, 0], v[:, 1])
        r = r[r <= self.cutoff]
        # both orientations are listed, halve the sum
        return float(np.sum(r ** -(1 + self.delta)) / 2)

    def __call__(self, x) -> float:
        tri = _as_float_tri(x)
        return self.from_vectors(_enumerate(tri, self.cutoff))


def _as_float_tri(x) -> _Triangulation:
    if isinstance(x, TranslationSurface):
        tri = _float_copy(x._tri)
        tri.make_delaunay()
        return tri
    return x if not x.exact else _float_copy(x)


@dataclass
class DriftTable:
    """Per sample: ``f(x)`` and the circle average of ``f(g_t r_theta x)``.
    ``c`` is the least-squares slope of average against ``f`` and ``b`` the
    smallest intercept that makes ``average <= c f + b`` hold on the sample."""

    t: float
    f_values: np.ndarray
    averages: np.ndarray
    c: float
    b: float


def circle_average(f: HeightFunction, x, t: float, n_theta: int = 256) -> float:
    """``(1/2pi) int f(g_t r_theta x) d theta`` on an equispaced grid.

    Connections of ``g_t r_theta x`` no longer than the cutoff come from
    connections of ``x`` no longer than ``e^t`` times the cutoff, so one
    enumeration serves every direction.
    """
    tri = _as_float_tri(x)
    v = _enumerate(tri, f.cutoff * math.exp(t))
    if len(v) == 0:
        return 0.0
    thetas = 2 * math.pi * np.arange(n_theta) / n_theta
    total = 0.0
    et, emt = math.exp(t), math.exp(-t)
    for th in thetas:
        c, s = math.cos(th), math.sin(th)
        x1 = et * (c * v[:, 0] + s * v[:, 1])
        y1 = emt * (-s * v[:, 0] + c * v[:, 1])
        total += f.from_vectors(np.column_stack([x1, y1]))
    return total / n_theta


def drift_check(f: HeightFunction, samples: Sequence, t: float = 2.0, n_theta: int = 256) -> DriftTable:
    fx = np.array([f(x) for x in samples])
    avg = np.array([circle_average(f, x, t, n_theta) for x in samples])
    if len(samples) >= 2 and np.ptp(fx) > 0:
        c = float(np.polyfit(fx, avg, 1)[0])
    else:
        c = 1.0
    b = float(np.max(avg - c * fx)) if len(samples) else 0.0
    return DriftTable(float(t), fx, avg, c, max(b, 0.0))


@dataclass
class VisitControl:
    """Fractions of ``k < n`` with ``f(x_k) >= M``, and the fit
    ``fraction ~ K M^-p`` over the thresholds with a nonzero fraction."""

    thresholds: np.ndarray
    fractions: np.ndarray
    K: float
    p: float

    def envelope_ok(self) -> bool:
        """Fractions fall at least like ``1/M``."""
        return self.p >= 1.0


def height_along(traj: WalkTrajectory, f: HeightFunction) -> np.ndarray:
    return np.array([f(x) for x in traj.states])


def visit_control(traj: WalkTrajectory, f: HeightFunction, Ms: Sequence[float],
                  values: Optional[np.ndarray] = None) -> VisitControl:
    vals = height_along(traj, f) if values is None else np.asarray(values)
    Ms = np.asarray(Ms, dtype=float)
    # f vanishes on states with no short connection; >= keeps M = 0 at fraction one
    frac = np.array([np.mean(vals >= M) for M in Ms])
    pos = frac > 0
    if pos.sum() >= 2:
        slope, icpt = np.polyfit(np.log(Ms[pos]), np.log(frac[pos]), 1)
        p, K = float(-slope), float(math.exp(icpt))
    else:
        p, K = math.inf, float(np.max(frac * Ms)) if len(Ms) else 0.0
    return VisitControl(Ms, frac, K, p)


# --------------------------------------------------------------- tracking

@dataclass
class Tracking:
    """``lambda_hat`` and ``theta_bar`` (mod pi) from the final product and
    ``e_n = (1/n) log||g_{lambda_hat n} r_theta_bar (g_n...g_1)^-1||``."""

    lambda_hat: float
    theta_bar: float
    checkpoints: np.ndarray
    errors: np.ndarray

    def slope(self, n_min: int = 500, n_max: int = 5000) -> float:
        sel = (self.checkpoints >= n_min) & (self.checkpoints <= n_max)
        if sel.sum() < 2:
            raise ValueError("fewer than two checkpoints in range")
        return float(np.polyfit(self.checkpoints[sel], self.errors[sel], 1)[0])


def _log_norm_estimate(steps) -> float:
    """``log||g_n ... g_1||`` with rescaling, as a precision budget."""
    m = np.eye(2)
    log_scale = 0.0
    for g in steps:
        m = g.matrix() @ m
        s = np.abs(m).max()
        m /= s
        log_scale += math.log(s)
    return log_scale + math.log(np.linalg.norm(m, 2))


def _mp_top_right_vector(m):
    """Unit top right-singular vector of a 2 x 2 mpmath matrix."""
    a = m.T * m
    p, q, r = a[0, 0], a[0, 1], a[1, 1]
    half = (p - r) / 2
    mu = (p + r) / 2 + mpmath.sqrt(half * half + q * q)
    # two expressions for the eigenvector of mu; take the larger one
    v1 = mpmath.matrix([q, mu - p])
    v2 = mpmath.matrix([mu - r, q])
    v = v1 if mpmath.norm(v1) >= mpmath.norm(v2) else v2
    nv = mpmath.norm(v)
    return mpmath.matrix([1, 0]) if nv == 0 else v / nv


def final_direction(steps: Sequence[GroupElement]) -> float:
    """``theta_bar`` in ``[0, pi)`` from the right polar factor of the
    product, in double precision (the top right-singular direction is
    well conditioned)."""
    m = np.eye(2)
    for g in steps:
        m = g.matrix() @ m
        m /= np.abs(m).max()
    _, _, vt = np.linalg.svd(m)
    return math.atan2(vt[0, 1], vt[0, 0]) % math.pi


def sublinear_tracking(traj: WalkTrajectory, checkpoints: Optional[Sequence[int]] = None) -> Tracking:
    """Track the walk by ``g_{lambda n} r_theta_bar``.

    Products are formed in mpmath with enough bits to resolve angles of
    size ``||G_n||^-2``; the float product cannot, and ``e_n`` would be
    dominated by rounding.
    """
    n = traj.n
    if n < TRACKING_MIN_STEPS:
        raise ValueError(f"tracking needs at least {TRACKING_MIN_STEPS} steps, got {n}")
    if checkpoints is None:
        checkpoints = np.unique(np.geomspace(10, n, 40).astype(int))
    cps = sorted(set(int(c) for c in checkpoints))
    if cps[0] < 1 or cps[-1] > n:
        raise ValueError(f"checkpoints must lie in [1, {n}]")
    sigma = max(_log_norm_estimate(traj.steps), 1.0)
    bits = int(2 * sigma / math.log(2)) + 96
    with mpmath.workprec(bits):
        prod = mpmath.eye(2)
        saved = {}
        want = set(cps)
        for k, g in enumerate(traj.steps, start=1):
            # float steps have determinant 1 only to rounding; fix it exactly
            step = mpmath.matrix([[g.a, g.b], [g.c, g.d]])
            step /= mpmath.sqrt(step[0, 0] * step[1, 1] - step[0, 1] * step[1, 0])
            prod = step * prod
            if k in want:
                saved[k] = prod.copy()
        v = _mp_top_right_vector(prod)
        sigma_n = mpmath.log(mpmath.norm(prod * v))
        lam = sigma_n / n
        theta = mpmath.atan2(v[1], v[0])
        if theta < 0:
            theta += mpmath.pi
        if theta >= mpmath.pi:
            theta -= mpmath.pi
        c, s = mpmath.cos(theta), mpmath.sin(theta)
        r = mpmath.matrix([[c, s], [-s, c]])
        errs = []
        for k in cps:
            gk = saved[k]
            # det = 1, so the inverse is the adjugate
            inv = mpmath.matrix([[gk[1, 1], -gk[0, 1]], [-gk[1, 0], gk[0, 0]]])
            e = mpmath.exp(lam * k)
            m = mpmath.matrix([[e, 0], [0, 1 / e]]) * r * inv
            fro2 = sum(m[i, j] ** 2 for i in range(2) for j in range(2))
            # largest singular value of a determinant-one 2 x 2 matrix
            top = mpmath.sqrt((fro2 + mpmath.sqrt(max(fro2 * fro2 - 4, 0))) / 2)
            errs.append(max(float(mpmath.log(top)), 0.0) / k)
        return Tracking(float(lam), float(theta), np.array(cps, dtype=int), np.array(errs))


# -------------------------------------------------------------------- CSV

WALK_COLUMNS = ["seed", "n", "lambda_hat", "theta_bar", "e_n", "stationarity_defect"]


def write_walk_csv(path, rows: Sequence[Dict]) -> None:
    """Rows carry the columns of ``WALK_COLUMNS``; missing values are blank."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(WALK_COLUMNS)
        for row in rows:
            w.writerow(["" if row.get(c) is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                        for c in WALK_COLUMNS])


def read_walk_csv(path) -> List[Dict]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rec = {}
            for c in WALK_COLUMNS:
                v = row[c]
                rec[c] = None if v == "" else (int(v) if c in ("seed", "n") else float(v))
            out.append(rec)
    return out
