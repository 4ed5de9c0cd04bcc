"""Pure-Python hot loops. ``_kernels.pyx`` mirrors these operation by
operation so both backends produce bit-identical floats."""
from __future__ import annotations

import math

import numpy as np

from .errors import CornerHit, StepBudgetExceeded, ZeroLength

CORNER_TOL = 1e-12
EQUAL_TOL = 1e-12


def rauzy_zorich_run(lengths, top, bottom, t_max, max_steps=10_000_000):
    """Zorich-accelerated Rauzy-Veech induction up to renormalization time
    ``t_max``.

    Returns ``(mats, times, lengths, perms)``: ``mats[k]`` is the ``n x n``
    Zorich matrix (``lengths_old = M lengths_new``), ``times[k]`` the
    cumulative ``log(total_0 / total)`` after it, ``lengths`` the final
    normalized lengths and ``perms[k]`` the ``(top, bottom)`` pair before
    step ``k`` (one extra entry for the final permutation).
    """
    n = len(lengths)
    lam = [float(x) for x in lengths]
    top = [int(x) for x in top]
    bot = [int(x) for x in bottom]
    total = 0.0
    for i in range(n):
        total += lam[i]
    for i in range(n):
        lam[i] = lam[i] / total
    t = 0.0
    mats, times = [], []
    perms = [(tuple(top), tuple(bot))]
    while True:
        alpha, beta = top[n - 1], bot[n - 1]
        la, lb = lam[alpha], lam[beta]
        if abs(la - lb) <= EQUAL_TOL * max(la, lb):
            raise ZeroLength("last top and bottom intervals have equal length")
        kind = la > lb
        m = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
        while True:
            if kind:
                lam[alpha] = la - lb
                bot.pop()
                bot.insert(bot.index(alpha) + 1, beta)
                for r in range(n):
                    m[r][beta] += m[r][alpha]
            else:
                lam[beta] = lb - la
                top.pop()
                top.insert(top.index(beta) + 1, alpha)
                for r in range(n):
                    m[r][alpha] += m[r][beta]
            alpha, beta = top[n - 1], bot[n - 1]
            la, lb = lam[alpha], lam[beta]
            if abs(la - lb) <= EQUAL_TOL * max(la, lb) or (la > lb) != kind:
                break
        total = 0.0
        for i in range(n):
            total += lam[i]
        dt = -math.log(total)
        if t + dt > t_max:
            break
        t = t + dt
        for i in range(n):
            lam[i] = lam[i] / total
        mats.append(m)
        times.append(t)
        perms.append((tuple(top), tuple(bot)))
        if len(mats) > max_steps:
            raise StepBudgetExceeded(f"more than {max_steps} Zorich steps")
    out = np.array(mats, dtype=np.int64).reshape(len(mats), n, n)
    return out, np.array(times), np.array(lam), perms


def windtree_run(a, b, x0, y0, vx, vy, checkpoints, max_events=10 ** 10, record=0):
    """Billiard in the plane minus ``[0,a] x [0,b] + Z^2`` at unit speed.

    Returns ``(state, table, hits)``. ``state`` is ``[x, y, vx, vy, t,
    collisions]``; ``table`` has one row ``(displacement, running_max,
    collisions)`` per checkpoint time; ``hits`` holds the first ``record``
    collision points.
    """
    ix = math.floor(x0)
    iy = math.floor(y0)
    fx = x0 - ix
    fy = y0 - iy
    if 0.0 < fx < a and 0.0 < fy < b:
        raise ValueError("start point lies inside an obstacle")
    nrm = math.sqrt(vx * vx + vy * vy)
    vx = vx / nrm
    vy = vy / nrm
    n_check = len(checkpoints)
    table = np.zeros((n_check, 3))
    hits = np.zeros((record, 2))
    n_hits = 0
    t = 0.0
    collisions = 0
    events = 0
    runmax = 0.0
    k = 0
    inf = math.inf
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
            dtx = inf
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
            dty = inf
        dt = dtx if dtx < dty else dty
        tc = checkpoints[k]
        if t + dt >= tc:
            h = tc - t
            fx = fx + vx * h
            fy = fy + vy * h
            t = tc
            dxx = (ix + fx) - x0
            dyy = (iy + fy) - y0
            d = math.sqrt(dxx * dxx + dyy * dyy)
            if d > runmax:
                runmax = d
            table[k, 0] = d
            table[k, 1] = runmax
            table[k, 2] = collisions
            k += 1
            continue
        if abs(dtx - dty) <= CORNER_TOL * dt:
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
            nrm = math.sqrt(vx * vx + vy * vy)
            vx = vx / nrm
            vy = vy / nrm
        dxx = (ix + fx) - x0
        dyy = (iy + fy) - y0
        d = math.sqrt(dxx * dxx + dyy * dyy)
        if d > runmax:
            runmax = d
    state = np.array([ix + fx, iy + fy, vx, vy, t, float(collisions)])
    return state, table, hits[:n_hits]
