"""Roth-type renormalization times and the evidence tables for conditions
(a), (b) and (c).

The cocycle is tracked exactly: cumulative products ``P(t)`` of the integer
Delaunay stream are kept as Python ints on the flow's time grid, and the
transition between two times is ``P(b) P(a)^{-1}`` with the symplectic
inverse. Off-grid times (bisection) fork the flow from the grid state below.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import FiltrationNotConverged, TimeHorizonExceeded
from .flow import DEFAULT_DT, GeodesicFlow
from .linalg import int_identity, int_matmul
from .surface import TranslationSurface, period_coordinates

DEFAULT_HORIZON = 15.0
COEFF_ETA = 1e-9
BISECTIONS = 5  # refine to dt / 32


@dataclass(frozen=True)
class RothTimes:
    """Increasing renormalization times ``t_1 < t_2 < ...``."""

    times: Tuple[float, ...]
    theta: float = 0.0
    dt: float = DEFAULT_DT
    horizon: float = DEFAULT_HORIZON

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("Roth times must be strictly increasing")
        if self.times and self.times[0] <= 0:
            raise ValueError("Roth times must be positive")

    def __len__(self):
        return len(self.times)

    def __getitem__(self, i):
        return self.times[i]


def symplectic_inverse(m):
    """``M^{-1} = -J M^T J`` for integer symplectic ``M`` (exact)."""
    n = len(m)
    g = n // 2
    # (-J M^T J)_{ij} with J = [[0, I], [-I, 0]]
    out = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            ii = i + g if i < g else i - g
            jj = j + g if j < g else j - g
            s = 1 if (i < g) == (j < g) else -1
            out[i][j] = s * m[jj][ii]
    return out


class DelaunayOrbit:
    """Exact cumulative cocycle along ``g_t r_theta S`` on the grid ``k dt``."""

    def __init__(self, S: TranslationSurface, theta: float, dt: float = DEFAULT_DT):
        self.flow = GeodesicFlow(S, theta, dt)
        self.dt = dt
        self.dim = self.flow.dim
        self.base = TranslationSurface(self.flow.tri.copy())
        self._states = [self.flow.tri.copy()]
        self._products = [int_identity(self.dim)]

    def extend_to(self, k: int) -> None:
        while len(self._products) <= k:
            m = self.flow.step()
            p = self._products[-1]
            self._products.append(p if m is None else int_matmul(m, p))
            self._states.append(self.flow.tri.copy())

    def product(self, t: float):
        """``P(t) = A(0, t)`` as exact int rows."""
        k = int(math.floor(t / self.dt + 1e-9))
        self.extend_to(k)
        rest = t - k * self.dt
        if rest <= 1e-12:
            return self._products[k]
        f = self.flow.fork()
        f.tri = self._states[k].copy()
        m = f.step(rest)
        return self._products[k] if m is None else int_matmul(m, self._products[k])

    def transition(self, a: float, b: float):
        """``A(a, b) = P(b) P(a)^{-1}``."""
        return int_matmul(self.product(b), symplectic_inverse(self.product(a)))

    def horizontal_periods(self) -> np.ndarray:
        """Horizontal periods of the basis cycles of the starting surface."""
        return period_coordinates(self.base)[0]


def all_coefficients_nonzero(m, eta: float = COEFF_ETA) -> bool:
    """Exact test for integer matrices; relative threshold ``eta`` for floats."""
    flat = [x for row in m for x in row]
    if all(isinstance(x, (int, np.integer)) for x in flat):
        return all(x != 0 for x in flat)
    arr = np.abs(np.asarray(flat, dtype=float))
    return bool(np.all(arr > eta * arr.max()))


def _next_time(orbit: DelaunayOrbit, t0: float, horizon: float, eta: float) -> float:
    dt = orbit.dt
    p0_inv = symplectic_inverse(orbit.product(t0))
    k0 = int(math.floor(t0 / dt + 1e-9)) + 1
    k1 = int(math.floor((t0 + horizon) / dt + 1e-9))
    if k1 < k0:
        raise ValueError("horizon shorter than one grid step")
    orbit.extend_to(k1)

    def good(t):
        return all_coefficients_nonzero(int_matmul(orbit.product(t), p0_inv), eta)

    flags = [good(k * dt) for k in range(k0, k1 + 1)]
    if not flags[-1]:
        raise TimeHorizonExceeded(
            f"coefficients still degenerate at t={k1 * dt:.3f} (horizon {horizon} after {t0:.3f})")
    j = len(flags) - 1
    while j > 0 and flags[j - 1]:
        j -= 1
    hi = (k0 + j) * dt
    lo = max(t0, hi - dt)
    for _ in range(BISECTIONS):
        mid = 0.5 * (lo + hi)
        if good(mid):
            hi = mid
        else:
            lo = mid
    return hi


def roth_times(S: TranslationSurface, theta: float, i_max: int, dt: float = DEFAULT_DT,
               horizon: float = DEFAULT_HORIZON, eta: float = COEFF_ETA,
               orbit: Optional[DelaunayOrbit] = None) -> RothTimes:
    """First ``i_max`` times ``t_{i+1} = t_i + t_1(g_{t_i} x)`` for
    ``x = r_theta S``.

    ``t_1(y)`` is the start of the last run of grid times on which every
    coefficient of the transition matrix from ``y`` is nonzero, checked up
    to ``horizon`` past the base time and refined by bisection.
    """
    if i_max < 1:
        raise ValueError("i_max must be at least 1")
    orbit = orbit or DelaunayOrbit(S, theta, dt)
    times: List[float] = []
    t = 0.0
    for _ in range(i_max):
        t = _next_time(orbit, t, horizon, eta)
        times.append(t)
    return RothTimes(tuple(times), theta=theta, dt=dt, horizon=horizon)


# ------------------------------------------------------------ condition (a)

def roth_condition_a(times) -> Dict[int, float]:
    """Ratios ``(t_i - t_{i-1}) / t_i`` keyed by ``i >= 2`` (1-based).

    ``i = 1`` is left out since ``t_0 = 0`` makes that ratio identically 1.
    """
    t = list(times.times if isinstance(times, RothTimes) else times)
    if len(t) < 2:
        raise ValueError("need at least two times")
    return {i + 1: (t[i] - t[i - 1]) / t[i] for i in range(1, len(t))}


# ------------------------------------------------------------ mp helpers

def _bits(m) -> int:
    return max(1, max(abs(int(x)).bit_length() for row in m for x in row))


def _mp_svd(m, prec: int):
    import mpmath

    with mpmath.workprec(prec):
        a = mpmath.matrix([[mpmath.mpf(int(x)) for x in row] for row in m])
        u, s, v = mpmath.svd_r(a)
    return u, s, v


def _mp_norm(a) -> float:
    """Spectral norm of an mpmath matrix, as a float log-safe value."""
    import mpmath

    if a.cols == 0 or a.rows == 0:
        return 0.0
    s = mpmath.svd_r(a, compute_uv=False)
    return max(s)


def _log_norm(m) -> float:
    import mpmath

    with mpmath.workprec(64 + 2 * _bits(m)):
        a = mpmath.matrix([[mpmath.mpf(int(x)) for x in row] for row in m])
        return float(mpmath.log(_mp_norm(a)))


# ------------------------------------------------------------ condition (b)

@dataclass
class ConditionBReport:
    """Norms of the cocycle restricted to the zero-horizontal-period
    hyperplane, with two fits.

    ``exponent`` is the slope of ``log|A_V0|`` against ``log|A|`` (the
    renormalization-norm form, below 1 when the second exponent is);
    ``loglog_exponent`` is the slope against ``log t``.
    """

    t: np.ndarray
    log_norm_v0: np.ndarray
    log_norm_full: np.ndarray
    exponent: float
    constant: float
    loglog_exponent: float
    loglog_constant: float
    alignment: float


def _fit(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.ptp(x) < 1e-12:
        return 0.0, float(np.max(y)) if len(y) else 0.0
    slope, icpt = np.polyfit(x, y, 1)
    # smallest constant making the envelope hold on the sample
    c = float(np.max(y - slope * x))
    return float(slope), c


def _homology_action(m):
    """Cohomology step ``X`` acts on cycles by ``X^{-T} = J X J^{-1}``."""
    return [list(r) for r in zip(*symplectic_inverse(m))]


def roth_condition_b(orbit: DelaunayOrbit, T: float, margin: float = 20.0,
                     n_samples: int = 40) -> ConditionBReport:
    """Growth of the cocycle on ``V0``, the cycles with zero horizontal period.

    ``V0`` is taken as the slow hyperplane of the homology action on
    ``[0, T + margin]`` (high-precision SVD of the exact product); it is
    compared against the float horizontal periods through ``alignment``
    (``|cos|`` between the two normals).
    """
    import mpmath

    dim = orbit.dim
    t_end = T + margin
    h_end = _homology_action(orbit.product(t_end))
    prec = 2 * _bits(h_end) + 96
    _, _, v = _mp_svd(h_end, prec)
    ts = np.linspace(T / n_samples, T, n_samples)
    log_v0, log_full = [], []
    with mpmath.workprec(prec):
        # rows of v are right singular vectors, fastest first
        basis = mpmath.matrix(dim, dim - 1)
        for i in range(1, dim):
            for j in range(dim):
                basis[j, i - 1] = v[i, j]
        normal = np.array([float(v[0, j]) for j in range(dim)])
        for t in ts:
            h = _homology_action(orbit.product(float(t)))
            hm = mpmath.matrix([[mpmath.mpf(int(x)) for x in row] for row in h])
            log_v0.append(float(mpmath.log(_mp_norm(hm * basis))))
            log_full.append(float(mpmath.log(_mp_norm(hm))))
    hp = orbit.horizontal_periods()
    alignment = abs(float(normal @ hp)) / (np.linalg.norm(normal) * np.linalg.norm(hp))
    log_v0 = np.array(log_v0)
    log_full = np.array(log_full)
    slope, c = _fit(log_full, log_v0)
    ll_slope, ll_c = _fit(np.log(ts), log_v0)
    return ConditionBReport(ts, log_v0, log_full, slope, math.exp(c), ll_slope, math.exp(ll_c), alignment)


# ------------------------------------------------------------ condition (c)

@dataclass
class ConditionCRow:
    i: int
    r: int
    t_i: float
    t_ir: float
    stable_norm: float
    quotient_inverse_norm: float
    block_norm: float
    full_norm: float


@dataclass
class ConditionCReport:
    rows: List[ConditionCRow] = field(default_factory=list)
    stable_dim: int = 0

    def to_csv(self, path) -> None:
        write_condition_c_csv(path, self)


def _stable_basis(m_far, rate_span: float, gap: float, prec: int):
    """Orthonormal basis (mp columns) of the contracting singular directions
    of ``m_far``; ``rate_span`` is its time length."""
    import mpmath

    dim = len(m_far)
    _, s, v = _mp_svd(m_far, prec)
    with mpmath.workprec(prec):
        rates = [float(mpmath.log(s[i])) / rate_span for i in range(dim)]
    order = sorted(range(dim), key=lambda i: -rates[i])
    stable = [i for i in order if rates[i] < -gap]
    neutral = [i for i in order if abs(rates[i]) <= gap]
    if stable and (neutral or 2 * len(stable) != dim):
        raise FiltrationNotConverged(
            f"stable rates {sorted(rates)} do not split cleanly (gap {gap}, span {rate_span:.1f})")
    with mpmath.workprec(prec):
        vs = mpmath.matrix(dim, len(stable))
        vu = mpmath.matrix(dim, dim - len(stable))
        for c, i in enumerate(stable):
            for j in range(dim):
                vs[j, c] = v[i, j]
        rest = [i for i in order if i not in stable]
        for c, i in enumerate(rest):
            for j in range(dim):
                vu[j, c] = v[i, j]
    return vs, vu


def roth_condition_c(orbit: DelaunayOrbit, times, i_values: Sequence[int], r_values: Sequence[int],
                     margin: float = 20.0, gap: float = 0.05) -> ConditionCReport:
    """Norms of the stable block ``B(t_i, t_{i+r})``, of the inverse of the
    quotient block, of the full block and of ``A(0, t_{i+r})``.

    The stable space at ``t_i`` is spanned by the contracting right singular
    vectors of the exact product ``A(t_i, t_end)``, ``t_end`` being ``margin``
    past the last time used, computed with mpmath. Without a split (all rates
    within ``gap`` of zero) the stable and quotient norms fall back to the
    full block norm.
    """
    import mpmath

    t = list(times.times if isinstance(times, RothTimes) else times)
    i_values = [i for i in i_values if 1 <= i <= len(t)]
    last = max(i + r for i in i_values for r in r_values)
    if last > len(t):
        raise ValueError(f"need at least {last} times, have {len(t)}")
    t_end = t[last - 1] + margin
    report = ConditionCReport()
    cache = {}

    def stable_at(i):
        if i not in cache:
            ti = t[i - 1]
            far = orbit.transition(ti, t_end)
            prec = 2 * _bits(far) + 96
            cache[i] = (_stable_basis(far, t_end - ti, gap, prec), prec)
        return cache[i]

    for i in i_values:
        (vs_i, vu_i), prec_i = stable_at(i)
        for r in r_values:
            j = i + r
            ti, tj = t[i - 1], t[j - 1]
            block = orbit.transition(ti, tj)
            full = orbit.product(tj)
            (vs_j, vu_j), prec_j = stable_at(j)
            with mpmath.workprec(max(prec_i, prec_j)):
                bm = mpmath.matrix([[mpmath.mpf(int(x)) for x in row] for row in block])
                block_norm = _mp_norm(bm)
                if vs_i.cols == 0:
                    stable_norm = quot_inv = block_norm
                else:
                    stable_norm = _mp_norm(bm * vs_i)
                    # quotient H/V_s(t_i) -> H/V_s(t_j) on orthogonal complements
                    q = vu_j.T * bm * vu_i
                    sq = mpmath.svd_r(q, compute_uv=False)
                    quot_inv = 1 / min(sq)
                report.rows.append(ConditionCRow(i, r, ti, tj, float(stable_norm), float(quot_inv),
                                                 float(block_norm), math.exp(_log_norm(full))))
            report.stable_dim = vs_i.cols
    return report


CONDITION_C_COLUMNS = ["i", "r", "t_i", "t_i_plus_r", "stable_norm", "quotient_inverse_norm",
                       "block_norm", "full_norm"]


def write_condition_c_csv(path, report: ConditionCReport) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CONDITION_C_COLUMNS)
        for row in report.rows:
            w.writerow([row.i, row.r, repr(row.t_i), repr(row.t_ir), repr(row.stable_norm),
                        repr(row.quotient_inverse_norm), repr(row.block_norm), repr(row.full_norm)])


def read_condition_c_csv(path) -> ConditionCReport:
    report = ConditionCReport()
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            report.rows.append(ConditionCRow(
                int(rec["i"]), int(rec["r"]), float(rec["t_i"]), float(rec["t_i_plus_r"]),
                float(rec["stable_norm"]), float(rec["quotient_inverse_norm"]),
                float(rec["block_norm"]), float(rec["full_norm"])))
    return report


def write_condition_a_csv(path, times: RothTimes) -> None:
    """Columns ``i, r, t_i, ratio`` (``r`` is 1: consecutive times)."""
    ratios = roth_condition_a(times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "r", "t_i", "ratio"])
        for i, q in ratios.items():
            w.writerow([i, 1, repr(times.times[i - 1]), repr(q)])
