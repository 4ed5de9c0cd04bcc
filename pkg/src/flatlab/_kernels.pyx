# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; a line-by-line twin of ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, log, floor, fabs, INFINITY

from .errors import CornerHit, StepBudgetExceeded, ZeroLength

cnp.import_array()

cdef double CORNER_TOL = 1e-12
cdef double EQUAL_TOL = 1e-12


def rauzy_zorich_run(lengths, top, bottom, double t_max, long max_steps=10000000):
    cdef Py_ssize_t n = len(lengths)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lam = np.array(lengths, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] tp = np.array(top, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bt = np.array(bottom, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] m = np.zeros((n, n), dtype=np.int64)
    cdef double total = 0.0, t = 0.0, dt, la, lb, mx
    cdef Py_ssize_t i, r, idx, cap = 1024, count = 0
    cdef long alpha, beta
    cdef bint kind
    cdef cnp.ndarray[cnp.int64_t, ndim=3] mats = np.zeros((cap, n, n), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] times = np.zeros(cap)
    perms = [(tuple(tp.tolist()), tuple(bt.tolist()))]
    for i in range(n):
        total += lam[i]
    for i in range(n):
        lam[i] = lam[i] / total
    while True:
        alpha = tp[n - 1]
        beta = bt[n - 1]
        la = lam[alpha]
        lb = lam[beta]
        mx = la if la > lb else lb
        if fabs(la - lb) <= EQUAL_TOL * mx:
            raise ZeroLength("last top and bottom intervals have equal length")
        kind = la > lb
        m[:, :] = 0
        for i in range(n):
            m[i, i] = 1
        while True:
            if kind:
                lam[alpha] = la - lb
                idx = 0
                while bt[idx] != alpha:
                    idx += 1
                i = n - 1
                while i > idx + 1:
                    bt[i] = bt[i - 1]
                    i -= 1
                bt[idx + 1] = beta
                for r in range(n):
                    m[r, beta] += m[r, alpha]
            else:
                lam[beta] = lb - la
                idx = 0
                while tp[idx] != beta:
                    idx += 1
                i = n - 1
                while i > idx + 1:
                    tp[i] = tp[i - 1]
                    i -= 1
                tp[idx + 1] = alpha
                for r in range(n):
                    m[r, alpha] += m[r, beta]
            alpha = tp[n - 1]
            beta = bt[n - 1]
            la = lam[alpha]
            lb = lam[beta]
            mx = la if la > lb else lb
            if fabs(la - lb) <= EQUAL_TOL * mx or (la > lb) != kind:
                break
        total = 0.0
        for i in range(n):
            total += lam[i]
        dt = -log(total)
        if t + dt > t_max:
            break
        t = t + dt
        for i in range(n):
            lam[i] = lam[i] / total
        if count == cap:
            cap *= 2
            mats = np.concatenate([mats, np.zeros_like(mats)])
            times = np.concatenate([times, np.zeros_like(times)])
        mats[count, :, :] = m
        times[count] = t
        count += 1
        perms.append((tuple(tp.tolist()), tuple(bt.tolist())))
        if count > max_steps:
            raise StepBudgetExceeded(f"more than {max_steps} Zorich steps")
    return mats[:count].copy(), times[:count].copy(), lam, perms


def windtree_run(double a, double b, double x0, double y0, double vx, double vy,
                 checkpoints, long long max_events=10000000000, Py_ssize_t record=0):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cps = np.asarray(checkpoints, dtype=np.float64)
    cdef Py_ssize_t n_check = cps.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] table = np.zeros((n_check, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] hits = np.zeros((record, 2))
    cdef Py_ssize_t n_hits = 0, k = 0
    cdef double ix = floor(x0), iy = floor(y0)
    cdef double fx = x0 - ix, fy = y0 - iy
    cdef double nrm, t = 0.0, runmax = 0.0, tx, ty, dtx, dty, dt, tc, h, dxx, dyy, d
    cdef long long collisions = 0, events = 0
    cdef bint hit
    if 0.0 < fx < a and 0.0 < fy < b:
        raise ValueError("start point lies inside an obstacle")
    nrm = sqrt(vx * vx + vy * vy)
    vx = vx / nrm
    vy = vy / nrm
    while k < n_check:
        if vx > 0.0:
            if fx >= 1.0:
                ix += 1
                fx = fx - 1.0
            tx = a if fx < a else 1.0
            dtx = (tx - fx) / vx
        elif vx < 0.0:
            if fx <= 0.0:
                ix -= 1
                fx = fx + 1.0
            tx = a if fx > a else 0.0
            dtx = (fx - tx) / (-vx)
        else:
            tx = 0.0
            dtx = INFINITY
        if vy > 0.0:
            if fy >= 1.0:
                iy += 1
                fy = fy - 1.0
            ty = b if fy < b else 1.0
            dty = (ty - fy) / vy
        elif vy < 0.0:
            if fy <= 0.0:
                iy -= 1
                fy = fy + 1.0
            ty = b if fy > b else 0.0
            dty = (fy - ty) / (-vy)
        else:
            ty = 0.0
            dty = INFINITY
        dt = dtx if dtx < dty else dty
        tc = cps[k]
        if t + dt >= tc:
            h = tc - t
            fx = fx + vx * h
            fy = fy + vy * h
            t = tc
            dxx = (ix + fx) - x0
            dyy = (iy + fy) - y0
            d = sqrt(dxx * dxx + dyy * dyy)
            if d > runmax:
                runmax = d
            table[k, 0] = d
            table[k, 1] = runmax
            table[k, 2] = <double>collisions
            k += 1
            continue
        if fabs(dtx - dty) <= CORNER_TOL * dt:
            raise CornerHit(f"trajectory hits an obstacle corner at t={t + dt!r}")
        events += 1
        if events > max_events:
            raise StepBudgetExceeded(f"more than {max_events} events")
        t = t + dt
        hit = False
        if dtx < dty:
            fy = fy + vy * dtx
            fx = tx
            if 0.0 < fy < b and ((vx > 0.0 and tx == 1.0) or (vx < 0.0 and tx == a)):
                vx = -vx
                hit = True
        else:
            fx = fx + vx * dty
            fy = ty
            if 0.0 < fx < a and ((vy > 0.0 and ty == 1.0) or (vy < 0.0 and ty == b)):
                vy = -vy
                hit = True
        if hit:
            collisions += 1
            if n_hits < record:
                hits[n_hits, 0] = ix + fx
                hits[n_hits, 1] = iy + fy
                n_hits += 1
            nrm = sqrt(vx * vx + vy * vy)
            vx = vx / nrm
            vy = vy / nrm
        dxx = (ix + fx) - x0
        dyy = (iy + fy) - y0
        d = sqrt(dxx * dxx + dyy * dyy)
        if d > runmax:
            runmax = d
    state = np.array([ix + fx, iy + fy, vx, vy, t, <double>collisions])
    return state, table, hits[:n_hits].copy()
