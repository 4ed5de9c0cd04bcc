"""Lyapunov exponents and Oseledets data of cocycle streams.

A stream is a time-stamped sequence of matrices ``M_1, M_2, ...``; the
cocycle at the final time is ``A = M_n ... M_1``. Products are accumulated
as ``A = Q D N`` with ``Q`` orthogonal, ``D`` diagonal (kept as logs) and
``N`` unit upper triangular, so nothing overflows over long horizons.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .errors import CocycleOverflow, GapTooSmall
from .linalg import int_det, int_identity, int_matmul

CADENCE_MAX_ENTRY = 2 ** 40
CADENCE_STEPS = 10
GAP_THRESHOLD = 0.05
# above this entry size a float QR of the pending product loses the slow
# singular values (relative error ~ eps * condition number)
HIGH_PRECISION_ENTRY = 2 ** 16


def _is_int_matrix(m) -> bool:
    return all(isinstance(x, (int, np.integer)) for row in m for x in row)


def _rows(m):
    """Matrix as a list of rows; integers stay Python ints."""
    if isinstance(m, np.ndarray) and m.dtype != object:
        if np.issubdtype(m.dtype, np.integer):
            return [[int(x) for x in row] for row in m]
        return [[float(x) for x in row] for row in m]
    return [[x if isinstance(x, (int, float)) else (int(x) if isinstance(x, np.integer) else float(x))
             for x in row] for row in m]


@dataclass
class CocycleStream:
    """Time-stamped cocycle matrices. ``T`` is the final time of the orbit
    segment, which may exceed the last stamp."""

    dim: int
    T: float
    times: List[float] = field(default_factory=list)
    matrices: List[list] = field(default_factory=list)
    backend: str = "delaunay"
    label: str = ""

    def append(self, t: float, m) -> None:
        if self.times and t < self.times[-1]:
            raise ValueError("stream times must be nondecreasing")
        self.times.append(float(t))
        self.matrices.append(_rows(m))

    def __iter__(self):
        return iter(zip(self.times, self.matrices))

    def __len__(self):
        return len(self.times)

    @property
    def is_integer(self) -> bool:
        return all(_is_int_matrix(m) for m in self.matrices)

    def product(self, t0: float = -math.inf, t1: float = math.inf):
        """Exact product of elements with time stamp in ``(t0, t1]``."""
        p = int_identity(self.dim)
        for t, m in self:
            if t0 < t <= t1:
                p = int_matmul(m, p)
        return p

    def window(self, t0: float, t1: float) -> "CocycleStream":
        """Elements in ``(t0, t1]`` re-based to start at time 0."""
        out = CocycleStream(self.dim, t1 - t0, backend=self.backend, label=self.label)
        for t, m in self:
            if t0 < t <= t1:
                out.append(t - t0, m)
        return out

    def mapped(self, fn, dim: int) -> "CocycleStream":
        out = CocycleStream(dim, self.T, backend=self.backend, label=self.label)
        for t, m in self:
            out.append(t, fn(m))
        return out

    def reversed_transposed(self) -> "CocycleStream":
        """Stream whose product is ``A^T``, with times mirrored."""
        out = CocycleStream(self.dim, self.T, backend=self.backend, label=self.label)
        for t, m in zip(reversed(self.times), reversed(self.matrices)):
            out.append(self.T - t, [list(r) for r in zip(*m)])
        return out


def identity_stream(dim: int, T: float, n: int = 0) -> CocycleStream:
    s = CocycleStream(dim, T, backend="identity")
    for k in range(n):
        s.append(T * (k + 1) / n, int_identity(dim))
    return s


# ------------------------------------------------------------------ frame

class CocycleFrame:
    """Running QR factorization ``A = Q diag(exp(log_r_diag)) N``.

    Incoming matrices are multiplied exactly in a pending buffer and folded
    into the float factorization when an entry exceeds ``2^40`` or every
    ``CADENCE_STEPS`` elements. ``keep_raw`` stores the exact integer product
    as well, for short-horizon checks.
    """

    def __init__(self, dim: int, keep_raw: bool = False,
                 max_entry: float = CADENCE_MAX_ENTRY, cadence: int = CADENCE_STEPS):
        self.dim = dim
        self.Q = np.eye(dim)
        self.log_r_diag = np.zeros(dim)
        self.N = np.eye(dim)
        self.t_elapsed = 0.0
        self.max_entry = max_entry
        self.cadence = cadence
        self._pending = None
        self._count = 0
        self.raw_integer_product = int_identity(dim) if keep_raw else None

    def push(self, m, t: Optional[float] = None) -> None:
        if self._pending is None:
            self._pending = [list(r) for r in m]
        else:
            self._pending = int_matmul(m, self._pending) if _is_int_matrix(m) and _is_int_matrix(self._pending) \
                else (np.asarray(m, dtype=float) @ np.asarray(self._pending, dtype=float)).tolist()
        self._count += 1
        if t is not None:
            self.t_elapsed = t
        if self._count >= self.cadence or max(abs(x) for r in self._pending for x in r) > self.max_entry:
            self.flush()

    def flush(self) -> None:
        if self._pending is None:
            return
        p = self._pending
        self._pending = None
        self._count = 0
        if self.raw_integer_product is not None and _is_int_matrix(p):
            self.raw_integer_product = int_matmul(p, self.raw_integer_product)
        big = max(abs(x) for r in p for x in r)
        if _is_int_matrix(p) and big > HIGH_PRECISION_ENTRY:
            q, nk, log_d = _qr_high_precision(p, self.Q, int(big).bit_length())
        else:
            pf = np.array([[float(x) for x in r] for r in p])
            if not np.all(np.isfinite(pf)):
                raise CocycleOverflow("pending product overflowed; lower the QR cadence")
            q, r = np.linalg.qr(pf @ self.Q)
            signs = np.where(np.diag(r) < 0, -1.0, 1.0)
            q = q * signs
            r = signs[:, None] * r
            d = np.diag(r).copy()
            if np.any(d == 0):
                raise CocycleOverflow("cocycle element is singular")
            nk = r / d[:, None]
            log_d = np.log(d)
        # (D_k N_k)(D N) = D_k D (D^-1 N_k D) N
        ld = self.log_r_diag
        scale = np.exp(np.clip(ld[None, :] - ld[:, None], -700, 700))
        self.N = np.triu(nk * scale) @ self.N
        self.log_r_diag = ld + log_d
        self.Q = q

    def r_matrix(self) -> np.ndarray:
        """``D N`` as a float matrix; only sensible on short horizons."""
        self.flush()
        return np.exp(self.log_r_diag)[:, None] * self.N

    def reconstruct(self) -> np.ndarray:
        return self.Q @ self.r_matrix()


def _qr_high_precision(p, q0, bits):
    """QR of ``p @ q0`` with ``p`` exact: the product and the Householder
    reflections run in mpmath with enough bits for the condition number."""
    import mpmath

    n = len(p)
    with mpmath.workprec(2 * bits + 96):
        qm = [[mpmath.mpf(float(x)) for x in row] for row in q0]
        z = mpmath.matrix(n, n)
        for i in range(n):
            for k in range(n):
                z[i, k] = mpmath.fsum(mpmath.mpf(p[i][j]) * qm[j][k] for j in range(n))
        q, r = mpmath.qr(z)
        d = [r[i, i] for i in range(n)]
        signs = [1 if x >= 0 else -1 for x in d]
        if any(x == 0 for x in d):
            raise CocycleOverflow("cocycle element is singular")
        qf = np.array([[float(q[i, j] * signs[j]) for j in range(n)] for i in range(n)])
        nk = np.array([[float(r[i, j] / d[i]) if j >= i else 0.0 for j in range(n)] for i in range(n)])
        log_d = np.array([float(mpmath.log(abs(x))) for x in d])
    # re-orthonormalize the rounded factor
    qf, fix = np.linalg.qr(qf)
    qf = qf * np.sign(np.diag(fix))
    return qf, nk, log_d


def accumulate(stream: CocycleStream, keep_raw: bool = False) -> CocycleFrame:
    frame = CocycleFrame(stream.dim, keep_raw=keep_raw)
    for t, m in stream:
        frame.push(m, t)
    frame.flush()
    frame.t_elapsed = stream.T
    return frame


# --------------------------------------------------------------- spectrum

@dataclass
class SpectrumEstimate:
    exponents: np.ndarray
    stderr: np.ndarray
    t_final: float
    window_rates: np.ndarray = None
    backend: str = ""

    def symmetry_defect(self) -> np.ndarray:
        return self.exponents + self.exponents[::-1]


def lyapunov_spectrum(stream: CocycleStream, dim: Optional[int] = None, n_windows: int = 10,
                      min_T: float = 100.0) -> SpectrumEstimate:
    """Growth rates of the QR diagonal, with batch-means standard errors.

    The horizon is cut into ``n_windows`` equal windows; the exponent is the
    total log-growth over ``T`` and the error is the spread of per-window
    rates divided by ``sqrt(n_windows)``.
    """
    dim = dim or stream.dim
    if dim != stream.dim:
        raise ValueError(f"stream dimension {stream.dim} does not match {dim}")
    if stream.T < min_T:
        raise ValueError(f"horizon {stream.T} shorter than {min_T}")
    if n_windows < 10:
        raise ValueError("at least 10 windows are needed for batch means")
    frame = CocycleFrame(dim)
    edges = [stream.T * (k + 1) / n_windows for k in range(n_windows)]
    marks = [frame.log_r_diag.copy()]
    w = 0
    for t, m in stream:
        while w < n_windows - 1 and t > edges[w]:
            frame.flush()
            marks.append(frame.log_r_diag.copy())
            w += 1
        frame.push(m, t)
    frame.flush()
    while len(marks) < n_windows + 1:
        marks.append(frame.log_r_diag.copy())
    marks = np.array(marks)
    width = stream.T / n_windows
    rates = np.diff(marks, axis=0) / width
    total = marks[-1] / stream.T
    order = np.argsort(-total, kind="stable")
    se = rates.std(axis=0, ddof=1) / math.sqrt(n_windows)
    return SpectrumEstimate(total[order], se[order], stream.T, rates[:, order], backend=stream.backend)


def spectrum_csv_rows(estimates: Iterable, surface_id: str, thetas: Sequence[float]):
    rows = []
    for est, theta in zip(estimates, thetas):
        row = {"surface_id": surface_id, "theta": repr(float(theta)), "T": repr(float(est.t_final))}
        for i, v in enumerate(est.exponents, 1):
            row[f"lambda_{i}"] = repr(float(v))
        for i, v in enumerate(est.stderr, 1):
            row[f"stderr_{i}"] = repr(float(v))
        row["backend"] = est.backend
        rows.append(row)
    return rows


def write_spectrum_csv(path, estimates, surface_id: str, thetas) -> None:
    rows = spectrum_csv_rows(estimates, surface_id, thetas)
    n = len(rows[0]) if rows else 0
    dim = (n - 4) // 2
    header = ["surface_id", "theta", "T"] + [f"lambda_{i}" for i in range(1, dim + 1)] \
        + [f"stderr_{i}" for i in range(1, dim + 1)] + ["backend"]
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=header)
        wr.writeheader()
        wr.writerows(rows)


# --------------------------------------------------------- exterior powers

def exterior_power(m, d: int):
    """Matrix of ``d x d`` minors in lexicographic index order.

    Integer input gives an exact integer result; float input uses floats.
    """
    rows = _rows(m) if not isinstance(m, list) else m
    n = len(rows)
    if not 1 <= d <= n:
        raise ValueError(f"degree {d} outside 1..{n}")
    subsets = list(itertools.combinations(range(n), d))
    exact = _is_int_matrix(rows)
    out = []
    for r in subsets:
        line = []
        for c in subsets:
            sub = [[rows[i][j] for j in c] for i in r]
            line.append(int_det(sub) if exact else float(np.linalg.det(np.array(sub, dtype=float))))
        out.append(line)
    return out if exact else np.array(out)


def exterior_stream(stream: CocycleStream, d: int) -> CocycleStream:
    dim = math.comb(stream.dim, d)
    return stream.mapped(lambda m: exterior_power(m, d), dim)


# ------------------------------------------------------------- filtration

@dataclass
class Filtration:
    """Nested slow subspaces ``V_1 < ... < V_s`` (orthonormal columns) with the
    exponent of each layer; ``V_s`` is the whole space."""

    subspaces: List[np.ndarray]
    exponents: List[float]
    spectrum: SpectrumEstimate
    frame: CocycleFrame

    def growth(self, v) -> float:
        """``(1/T) log(|A v| / |v|)`` computed in the log-scaled frame, so slow
        vectors keep their slow rate over long horizons."""
        v = np.asarray(v, dtype=float)
        f = self.frame
        w = f.Q.T @ v
        # A = (Q_b D N)^T = N^T D Q_b^T
        with np.errstate(divide="ignore"):
            logs = f.log_r_diag + np.log(np.abs(w))
        keep = np.abs(w) > 1e-13 * np.linalg.norm(v)
        if not np.any(keep):
            return -math.inf
        top = np.max(logs[keep])
        y = np.sign(w) * np.exp(np.where(keep, logs - top, -np.inf))
        out = f.N.T @ y
        return (top + math.log(np.linalg.norm(out)) - math.log(np.linalg.norm(v))) / self.spectrum.t_final


def _group_exponents(est: SpectrumEstimate, gap: float):
    lam, se = est.exponents, est.stderr
    groups = [[0]]
    for i in range(1, len(lam)):
        diff = lam[i - 1] - lam[i]
        noise = 2 * (se[i - 1] + se[i])
        if diff <= noise:
            groups[-1].append(i)
        elif diff < gap:
            raise GapTooSmall(f"exponents {lam[i - 1]:.4f} and {lam[i]:.4f} differ by {diff:.4f} < {gap}")
        else:
            groups.append([i])
    return groups


def oseledets_filtration(stream: CocycleStream, gap: float = GAP_THRESHOLD, n_windows: int = 10,
                         min_T: float = 100.0) -> Filtration:
    """Slow subspaces from the right singular directions of the final product.

    They come from QR iteration on the reversed, transposed stream: its
    orthogonal factor converges to the right singular vectors of ``A``
    ordered from fastest to slowest.
    """
    est = lyapunov_spectrum(stream, n_windows=n_windows, min_T=min_T)
    groups = _group_exponents(est, gap)
    frame = accumulate(stream.reversed_transposed())
    dim = stream.dim
    subspaces, exps = [], []
    k = 0
    for g in reversed(groups):
        k += len(g)
        subspaces.append(frame.Q[:, dim - k:].copy())
        exps.append(float(np.mean(est.exponents[g])))
    return Filtration(subspaces, exps, est, frame)


def top_growth_of_vector(stream: CocycleStream, v) -> float:
    """``(1/T) log(|A v| / |v|)`` by forward iteration with renormalization."""
    v = np.asarray(v, dtype=float)
    n0 = np.linalg.norm(v)
    if n0 == 0:
        raise ValueError("v must be nonzero")
    if stream.T <= 0:
        return 0.0
    x = v / n0
    log_norm = 0.0
    for _, m in stream:
        x = np.asarray(m, dtype=float) @ x
        nx = np.linalg.norm(x)
        log_norm += math.log(nx)
        x /= nx
    return log_norm / stream.T


def bad_subspace_margin(a: np.ndarray, v: np.ndarray):
    """Return ``(|A v|, sigma, |A|)`` where ``sigma`` is the distance of unit
    ``v`` from the span of the non-top right singular vectors of ``A``."""
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    _, s, vt = np.linalg.svd(a)
    sigma = abs(float(vt[0] @ v))
    return float(np.linalg.norm(a @ v)), sigma, float(s[0])


# ------------------------------------------------------------ exact oracle

def exact_singular_values(m, dps: int = 60) -> List[float]:
    """Singular values of an exact (integer or float) matrix via mpmath."""
    import mpmath

    with mpmath.workdps(dps):
        a = mpmath.matrix([[mpmath.mpf(x) for x in row] for row in m])
        s = mpmath.svd_r(a, compute_uv=False)
        return sorted((float(x) for x in s), reverse=True)


def qr_chain_singular_values(frame: CocycleFrame, dps: int = 60) -> List[float]:
    """Singular values of the accumulated ``D N`` factor, computed at high
    precision from its float entries (``Q`` does not change them)."""
    import mpmath

    frame.flush()
    with mpmath.workdps(dps):
        d = [mpmath.exp(mpmath.mpf(float(x))) for x in frame.log_r_diag]
        n = frame.N
        a = mpmath.matrix(frame.dim, frame.dim)
        for i in range(frame.dim):
            for j in range(i, frame.dim):
                a[i, j] = d[i] * mpmath.mpf(float(n[i, j]))
        s = mpmath.svd_r(a, compute_uv=False)
        return sorted((float(x) for x in s), reverse=True)
