"""Birkhoff averages along ``g_t r_theta x``, their consistency across
directions and basepoints, correlations of the rotated differences ``f_t``
and the unipotent-invariance defect.

Surfaces are handled as float triangulations kept Delaunay, so the systole
is the shortest edge and test functions are cheap to evaluate.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import DomainError
from .flow import DEFAULT_DT, GeodesicFlow, _float_copy
# the decomposition helpers are part of this module's public surface
from .group import GroupElement, conjugated_rotation_factors, decomposition_identity  # noqa: F401
from .surface import TranslationSurface, _Triangulation

__all__ = [
    "TestFunction", "smoothed_systole_indicator", "constant_function", "AverageRecord",
    "birkhoff_average", "birkhoff_curve", "theta_consistency", "alpha_t", "f_t_eval",
    "correlation_decay", "p_invariance_defect", "p_invariance_curve", "decomposition_identity",
    "conjugated_rotation_factors", "strong_law_synthetic", "write_experiment_csv", "write_plot_json",
]


def _image(tri: _Triangulation, m) -> _Triangulation:
    t = tri.copy()
    t.apply(*m)
    t.make_delaunay()
    return t


def _entries(g):
    if isinstance(g, GroupElement):
        return g.a, g.b, g.c, g.d
    m = np.asarray(g, dtype=float)
    if m.shape == (4,):
        return tuple(float(x) for x in m)
    return m[0, 0], m[0, 1], m[1, 0], m[1, 1]


@dataclass
class TestFunction:
    """A bounded function on surfaces, evaluated on Delaunay triangulations.

    ``support_bound``: the function vanishes when the systole is below it.
    ``lipschitz``: declared ``M`` with ``|phi(h y) - phi(y)| <= M |h - I|``
    for ``|h - I| <= 1``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    evaluator: Callable[[_Triangulation], float]
    support_bound: float = 0.0
    lipschitz: float = 0.0
    sup: float = 1.0

    def __call__(self, tri: _Triangulation) -> float:
        return float(self.evaluator(tri))

    def at(self, tri: _Triangulation, g=None) -> float:
        """``phi(g . tri)``; ``tri`` is not modified."""
        if g is None:
            return self(tri)
        return self(_image(tri, _entries(g)))

    def of_surface(self, S: TranslationSurface, g=None) -> float:
        tri = _float_copy(S._tri)
        if g is not None:
            tri.apply(*_entries(g))
        tri.make_delaunay()
        return self(tri)

    def lipschitz_ratio(self, tris: Sequence[_Triangulation], rng, n: int = 50, scale: float = 0.05) -> float:
        """Largest ``|phi(h y) - phi(y)| / |h - I|`` over random small ``h``
        near the identity; compare with ``lipschitz``."""
        worst = 0.0
        for _ in range(n):
            tri = tris[int(rng.integers(len(tris)))]
            x = rng.normal(0, scale, 3)
            # exp of a traceless matrix, first order is enough near I
            a, b, c = 1 + x[0], x[1], x[2]
            d = (1 + b * c) / a
            dist = float(np.linalg.norm(np.array([[a - 1, b], [c, d - 1]]), 2))
            if dist == 0:
                continue
            worst = max(worst, abs(self.at(tri, (a, b, c, d)) - self(tri)) / dist)
        return worst


def smoothed_systole_indicator(eps: float = 0.3, kappa: float = 0.2) -> TestFunction:
    """``clamp((systole - eps) / kappa, 0, 1)``."""
    if eps <= 0 or kappa <= 0:
        raise DomainError("eps and kappa must be positive")

    def phi(tri):
        return min(1.0, max(0.0, (tri.min_edge_length() - eps) / kappa))

    # |sys(h y) - sys(y)| <= |h - I| max(sys); only sys < eps + kappa matters
    m = 2.0 * (eps + kappa) / kappa
    return TestFunction(f"systole_indicator(eps={eps:g},kappa={kappa:g})", phi, eps, m, 1.0)


def constant_function(value: float = 1.0) -> TestFunction:
    return TestFunction(f"constant({value:g})", lambda tri: value, 0.0, 0.0, abs(value))


BUILTIN_TEST_FUNCTIONS = {
    "systole_indicator": smoothed_systole_indicator,
    "constant": constant_function,
}


# ------------------------------------------------------------ Birkhoff

@dataclass
class AverageRecord:
    surface_id: str
    theta: float
    T: float
    value: float
    step: float


def _orbit_samples(S: TranslationSurface, theta: float, phi: TestFunction, T: float, dt: float,
                   substeps: int, extra: Optional[Callable[[_Triangulation], float]] = None):
    """Values of ``phi`` (or ``extra``) on the grid of spacing ``dt / substeps``
    along ``g_t r_theta S``; off-grid points start from the grid state below."""
    n = int(round(T / dt))
    if abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be a multiple of dt")
    fn = extra if extra is not None else phi
    flow = GeodesicFlow(S, theta, dt)
    h = dt / substeps
    vals = np.empty(n * substeps + 1)
    vals[0] = fn(flow.tri)
    for k in range(n):
        base = flow.tri
        for j in range(1, substeps):
            e = math.exp(j * h)
            vals[k * substeps + j] = fn(_image(base, (e, 0.0, 0.0, 1.0 / e)))
        flow.step()
        vals[(k + 1) * substeps] = fn(flow.tri)
    return vals, h


def _cumulative_trapezoid(vals: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros_like(vals)
    out[1:] = np.cumsum(0.5 * h * (vals[1:] + vals[:-1]))
    return out


def birkhoff_curve(S: TranslationSurface, theta: float, phi: TestFunction, Ts: Sequence[float],
                   dt: float = DEFAULT_DT, substeps: int = 1) -> List[AverageRecord]:
    """Averages ``(1/T) int_0^T phi(g_t r_theta S) dt`` for several ``T`` from
    one orbit (trapezoid rule)."""
    Ts = sorted(float(t) for t in Ts)
    vals, h = _orbit_samples(S, theta, phi, Ts[-1], dt, substeps)
    cum = _cumulative_trapezoid(vals, h)
    out = []
    for T in Ts:
        k = int(round(T / h))
        out.append(AverageRecord(S.name or "", float(theta), T, float(cum[k] / T), h))
    return out


def birkhoff_average(S: TranslationSurface, theta: float, phi: TestFunction, T: float,
                     dt: float = DEFAULT_DT, substeps: int = 1) -> AverageRecord:
    if T <= 0:
        raise ValueError("T must be positive")
    return birkhoff_curve(S, theta, phi, [T], dt, substeps)[0]


@dataclass
class ThetaConsistency:
    mean: float
    spread: float
    values: np.ndarray
    thetas: np.ndarray
    T: float


def _spread(values: np.ndarray) -> float:
    m = float(np.mean(values))
    if m == 0:
        return 0.0 if np.ptp(values) == 0 else math.inf
    return float(np.ptp(values) / abs(m))


def theta_consistency(S: TranslationSurface, phi: TestFunction, T, n_theta: int = 20, seed: int = 0,
                      thetas: Optional[Sequence[float]] = None, dt: float = DEFAULT_DT) -> Dict[float, ThetaConsistency]:
    """Birkhoff averages over ``n_theta`` uniform random directions, keyed by
    ``T`` (one orbit per direction serves every ``T``). ``spread`` is
    ``(max - min) / mean``."""
    if thetas is None:
        if n_theta < 10:
            raise ValueError("n_theta must be at least 10")
        thetas = np.random.default_rng(seed).uniform(0, 2 * math.pi, n_theta)
    thetas = np.asarray(thetas, dtype=float)
    Ts = [float(T)] if np.isscalar(T) else [float(x) for x in T]
    table = np.array([[r.value for r in birkhoff_curve(S, th, phi, Ts, dt)] for th in thetas])
    out = {}
    for j, t in enumerate(sorted(Ts)):
        v = table[:, j]
        out[t] = ThetaConsistency(float(np.mean(v)), _spread(v), v, thetas, t)
    return out


# ------------------------------------------------------------ f_t and friends

def alpha_t(alpha: float, t: float) -> float:
    """Angle with ``e^{2t} tan(alpha_t) = alpha``."""
    if not math.isfinite(alpha) or t < 0:
        raise DomainError(f"need finite alpha and t >= 0, got alpha={alpha}, t={t}")
    return math.atan(alpha * math.exp(-2 * t))


def _phi_on_orbit(S: TranslationSurface, phi: TestFunction, theta: float, ts: Sequence[float],
                  dt: float = DEFAULT_DT) -> np.ndarray:
    """``phi(g_t r_theta S)`` for increasing ``ts`` along one flow."""
    flow = GeodesicFlow(S, theta, dt)
    out = []
    for t in ts:
        while flow.t + dt <= t + 1e-12:
            flow.step()
        rest = t - flow.t
        if rest > 1e-12:
            e = math.exp(rest)
            out.append(phi(_image(flow.tri, (e, 0.0, 0.0, 1.0 / e))))
        else:
            out.append(phi(flow.tri))
    return np.array(out)


def f_t_eval(S: TranslationSurface, phi: TestFunction, alpha: float, t: float, theta: float,
             dt: float = DEFAULT_DT) -> float:
    """``phi(g_t r_theta x) - phi(g_t r_{theta + alpha_t} x)``."""
    a = alpha_t(alpha, t)
    return float(_phi_on_orbit(S, phi, theta, [t], dt)[0] - _phi_on_orbit(S, phi, theta + a, [t], dt)[0])


def stratified_thetas(n: int, rng) -> np.ndarray:
    return 2 * math.pi * (np.arange(n) + rng.uniform(0, 1, n)) / n


def _stratified_error(y: np.ndarray) -> float:
    """Standard error of a stratified mean from paired neighbouring strata."""
    n = len(y) - len(y) % 2
    if n < 2:
        return 0.0
    d = y[0:n:2] - y[1:n:2]
    return float(math.sqrt(0.5 * np.sum(d * d)) / len(y))


@dataclass
class CorrelationResult:
    ts: np.ndarray
    thetas: np.ndarray
    f: np.ndarray                 # f[j, k] = f_{t_j}(theta_k)
    pairs: List[tuple] = field(default_factory=list)   # (s, t, estimate, stderr)
    C: float = 0.0
    rate: float = 0.0
    zero_mean: List[tuple] = field(default_factory=list)   # (t, mean, quad_error)
    gap_range: tuple = (0.0, math.inf)

    @property
    def zero_mean_ok(self) -> bool:
        return all(abs(m) <= 2 * q for _, m, q in self.zero_mean)

    def violations(self) -> List[tuple]:
        """Pairs in the fitted gap range lying above the envelope."""
        lo, hi = self.gap_range
        return [(s, t, c) for s, t, c, _ in self.pairs
                if lo - 1e-12 <= abs(s - t) <= hi + 1e-12
                and abs(c) > self.C * math.exp(-self.rate * abs(s - t)) * (1 + 1e-12)]


def correlation_decay(S: TranslationSurface, phi: TestFunction, alpha: float, ts: Sequence[float],
                      n_theta: int = 512, seed: int = 0, min_gap: float = 0.5,
                      max_gap: float = 5.0, dt: float = DEFAULT_DT) -> CorrelationResult:
    """Estimate ``(1/2pi) oint f_t f_s dtheta`` on stratified directions for
    all pairs in ``ts`` and fit an envelope ``C exp(-rate |s - t|)`` over
    gaps in ``[min_gap, max_gap]``.

    The rate is the least-squares slope of ``log |estimate|`` against the gap;
    ``C`` is the smallest constant putting every pair under the envelope.
    """
    if n_theta < 512:
        raise ValueError("n_theta must be at least 512")
    rng = np.random.default_rng(seed)
    thetas = stratified_thetas(n_theta, rng)
    ts = np.array(sorted(float(t) for t in ts))
    base = np.array([_phi_on_orbit(S, phi, th, ts, dt) for th in thetas]).T
    shifted = np.empty_like(base)
    for j, t in enumerate(ts):
        a = alpha_t(alpha, t)
        for k, th in enumerate(thetas):
            shifted[j, k] = _phi_on_orbit(S, phi, th + a, [t], dt)[0]
    f = base - shifted
    res = CorrelationResult(ts, thetas, f, gap_range=(float(min_gap), float(max_gap)))
    for j, t in enumerate(ts):
        res.zero_mean.append((float(t), float(np.mean(f[j])),
                              math.hypot(_stratified_error(base[j]), _stratified_error(shifted[j]))))
    gaps, logs = [], []
    for i in range(len(ts)):
        for j in range(i, len(ts)):
            prod = f[i] * f[j]
            c = float(np.mean(prod))
            res.pairs.append((float(ts[i]), float(ts[j]), c, _stratified_error(prod)))
            g = abs(ts[j] - ts[i])
            if min_gap - 1e-12 <= g <= max_gap + 1e-12 and c != 0:
                gaps.append(g)
                logs.append(math.log(abs(c)))
    if len(set(gaps)) >= 2:
        slope, _ = np.polyfit(gaps, logs, 1)
        res.rate = float(-slope)
    fit = [(s, t, c) for s, t, c, _ in res.pairs if min_gap - 1e-12 <= abs(s - t) <= max_gap + 1e-12]
    res.C = max((abs(c) * math.exp(res.rate * abs(s - t)) for s, t, c in fit), default=0.0)
    return res


def p_invariance_curve(S: TranslationSurface, phi: TestFunction, alpha: float, theta: float,
                       Ts: Sequence[float], dt: float = DEFAULT_DT) -> Dict[float, float]:
    """``|(1/T) int_0^T phi(u_alpha g_t r_theta x) - phi(g_t r_theta x) dt|``
    for several ``T`` along one orbit."""
    Ts = sorted(float(t) for t in Ts)
    if alpha == 0:
        return {T: 0.0 for T in Ts}
    u = (1.0, float(alpha), 0.0, 1.0)

    def diff(tri):
        return phi(_image(tri, u)) - phi(tri)

    vals, h = _orbit_samples(S, theta, phi, Ts[-1], dt, 1, extra=diff)
    cum = _cumulative_trapezoid(vals, h)
    return {T: float(abs(cum[int(round(T / h))]) / T) for T in Ts}


def p_invariance_defect(S: TranslationSurface, phi: TestFunction, alpha: float, theta: float, T: float,
                        dt: float = DEFAULT_DT) -> float:
    return p_invariance_curve(S, phi, alpha, theta, [T], dt)[float(T)]


# ------------------------------------------------------------ synthetic strong law

def strong_law_synthetic(rate: float, Ts: Sequence[float], n_paths: int, dt: float = 0.1,
                         seed: int = 0) -> np.ndarray:
    """Time averages of stationary Gaussian processes with correlation
    ``exp(-rate |s - t|)`` (exact Ornstein-Uhlenbeck updates), one path per
    simulated direction. Returns an ``n_paths x len(Ts)`` array."""
    rng = np.random.default_rng(seed)
    Ts = sorted(float(t) for t in Ts)
    n = int(round(Ts[-1] / dt))
    rho = math.exp(-rate * dt)
    x = rng.normal(size=n_paths)
    cum = np.zeros(n_paths)
    marks = {int(round(T / dt)): T for T in Ts}
    out = np.zeros((n_paths, len(Ts)))
    col = {T: i for i, T in enumerate(Ts)}
    for k in range(1, n + 1):
        nxt = rho * x + math.sqrt(1 - rho * rho) * rng.normal(size=n_paths)
        cum += 0.5 * dt * (x + nxt)
        x = nxt
        if k in marks:
            out[:, col[marks[k]]] = cum / marks[k]
    return out


# ------------------------------------------------------------ output

EXPERIMENT_COLUMNS = ["experiment", "surface_id", "phi", "alpha", "theta", "s", "t", "T", "value"]


def write_experiment_csv(path, rows: Iterable[dict]) -> None:
    """Rows are dicts keyed by ``EXPERIMENT_COLUMNS``; missing keys are blank."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(EXPERIMENT_COLUMNS)
        for r in rows:
            w.writerow(["" if r.get(k) is None else (repr(r[k]) if isinstance(r[k], float) else r[k])
                        for k in EXPERIMENT_COLUMNS])


def write_plot_json(path, curves: Dict[str, Sequence]) -> None:
    """Neutral plot data: ``{"curves": {name: [[x, y], ...]}}``."""
    data = {"curves": {name: [[float(x), float(y)] for x, y in pts] for name, pts in curves.items()}}
    with open(path, "w") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
