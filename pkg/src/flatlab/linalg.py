"""Exact integer linear algebra on small matrices (lists of Python ints)."""
from __future__ import annotations

import numpy as np


def standard_symplectic(n: int) -> np.ndarray:
    """The ``2g x 2g`` form ``[[0, I], [-I, 0]]``."""
    if n % 2:
        raise ValueError("dimension must be even")
    g = n // 2
    j = np.zeros((n, n), dtype=np.int64)
    j[:g, g:] = np.eye(g, dtype=np.int64)
    j[g:, :g] = -np.eye(g, dtype=np.int64)
    return j


def int_matmul(a, b):
    """Product of integer matrices given as nested sequences, exact."""
    bt = list(zip(*b))
    return [[sum(x * y for x, y in zip(row, col)) for col in bt] for row in a]


def int_identity(n: int):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def as_int_rows(m):
    return [[int(x) for x in row] for row in np.asarray(m, dtype=object)]


def symplectic_reduction(gram):
    """Find unimodular ``P`` with ``P^T gram P`` equal to the standard form.

    ``gram`` must be an integer, skew-symmetric, unimodular matrix. The
    reduction is a symplectic Gram-Schmidt over the integers driven by the
    Euclidean algorithm, so the output is exact.
    """
    m = [[int(x) for x in row] for row in gram]
    n = len(m)
    if n % 2:
        raise ValueError("skew form of odd rank")
    p = int_identity(n)

    def colop(j, k, c):
        # column j += c * column k, applied by congruence
        if not c:
            return
        for r in range(n):
            m[r][j] += c * m[r][k]
        for r in range(n):
            m[j][r] += c * m[k][r]
        for r in range(n):
            p[r][j] += c * p[r][k]

    def swap(i, j):
        if i == j:
            return
        for row in m:
            row[i], row[j] = row[j], row[i]
        m[i], m[j] = m[j], m[i]
        for row in p:
            row[i], row[j] = row[j], row[i]

    def negate(j):
        for r in range(n):
            m[r][j] = -m[r][j]
        for r in range(n):
            m[j][r] = -m[j][r]
        for row in p:
            row[j] = -row[j]

    for k in range(0, n, 2):
        while True:
            nz = [j for j in range(k + 1, n) if m[k][j]]
            if not nz:
                raise ValueError("form is degenerate")
            swap(k + 1, min(nz, key=lambda j: abs(m[k][j])))
            pivot = m[k][k + 1]
            clean = True
            for j in range(k + 2, n):
                colop(j, k + 1, -(m[k][j] // pivot))
                if m[k][j]:
                    clean = False
            if clean:
                break
        if m[k][k + 1] == -1:
            negate(k + 1)
        if m[k][k + 1] != 1:
            raise ValueError("form is not unimodular")
        for j in range(k + 2, n):
            a, b = m[j][k + 1], m[j][k]
            colop(j, k, -a)
            colop(j, k + 1, b)

    g = n // 2
    order = [2 * i for i in range(g)] + [2 * i + 1 for i in range(g)]
    return [[row[c] for c in order] for row in p]


def symplectic_defect(m, j) -> int:
    """Max-entry of ``M^T J M - J`` computed exactly."""
    mt = [list(r) for r in zip(*m)]
    lhs = int_matmul(int_matmul(mt, j), m)
    return max(abs(int(lhs[r][c]) - int(j[r][c])) for r in range(len(j)) for c in range(len(j)))


def int_det(m) -> int:
    """Exact determinant by fraction-free Bareiss elimination."""
    a = [[int(x) for x in row] for row in m]
    n = len(a)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for r in range(k + 1, n):
                if a[r][k]:
                    a[k], a[r] = a[r], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]
