"""Compiled kernels for penalized binomial logistic regression.

Objective minimized (per unit of total at-risk weight ``N``)::

    (1/N) sum_i [m_i softplus(eta_i) - y_i eta_i]
        + sum_j l1_j |b_j| + sum_j l2_j b_j**2

with ``eta = b0 + X b``. ``l1`` and ``l2`` already include lambda and the
per-coefficient weights. The intercept is never penalized.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _softplus(x):
    if x > 0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@njit(cache=True, nogil=True)
def _expit(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def objective(X, y, m, inv_n, b0, beta, l1, l2):
    n, p = X.shape
    total = 0.0
    for i in range(n):
        eta = b0
        for j in range(p):
            eta += X[i, j] * beta[j]
        total += m[i] * _softplus(eta) - y[i] * eta
    total *= inv_n
    for j in range(p):
        total += l1[j] * abs(beta[j]) + l2[j] * beta[j] * beta[j]
    return total


@njit(cache=True, nogil=True)
def _eta(X, b0, beta, out):
    n, p = X.shape
    for i in range(n):
        acc = b0
        for j in range(p):
            acc += X[i, j] * beta[j]
        out[i] = acc


@njit(cache=True, nogil=True)
def _sweep(XT, v, r, beta, a, l1, l2, cols, ncols):
    """One coordinate pass over ``cols[:ncols]``; returns max scaled change."""
    n = r.shape[0]
    biggest = 0.0
    for k in range(ncols):
        j = cols[k]
        aj = a[j]
        old = beta[j]
        if aj <= 0.0:
            if old != 0.0:
                beta[j] = 0.0
            continue
        g = 0.0
        xj = XT[j]
        for i in range(n):
            g += xj[i] * r[i]
        z = aj * old + g
        if z > l1[j]:
            new = (z - l1[j]) / (aj + 2.0 * l2[j])
        elif z < -l1[j]:
            new = (z + l1[j]) / (aj + 2.0 * l2[j])
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            beta[j] = new
            for i in range(n):
                r[i] -= v[i] * xj[i] * d
            ch = aj * d * d
            if ch > biggest:
                biggest = ch
    return biggest


@njit(cache=True, nogil=True)
def _intercept_step(v, r):
    sv = 0.0
    sr = 0.0
    for i in range(v.shape[0]):
        sv += v[i]
        sr += r[i]
    if sv <= 0.0:
        return 0.0, 0.0
    d = sr / sv
    for i in range(v.shape[0]):
        r[i] -= v[i] * d
    return d, sv * d * d


@njit(cache=True, nogil=True)
def solve(X, XT, y, m, inv_n, b0, beta, l1, l2, tol, max_outer, max_inner):
    """IRLS outer loop with cyclic coordinate descent on each quadratic model.

    ``beta`` is updated in place (warm start). Returns
    ``(b0, n_outer, total_inner_passes, converged)``.
    """
    n, p = X.shape
    eta = np.empty(n)
    v = np.empty(n)
    r = np.empty(n)
    a = np.empty(p)
    all_cols = np.arange(p)
    active = np.empty(p, dtype=np.int64)
    beta_old = np.empty(p)
    passes = 0

    _eta(X, b0, beta, eta)
    f_old = objective(X, y, m, inv_n, b0, beta, l1, l2)
    for outer in range(max_outer):
        for i in range(n):
            pr = _expit(eta[i])
            v[i] = m[i] * pr * (1.0 - pr) * inv_n
            r[i] = (y[i] - m[i] * pr) * inv_n
        for j in range(p):
            acc = 0.0
            xj = XT[j]
            for i in range(n):
                acc += v[i] * xj[i] * xj[i]
            a[j] = acc
        for j in range(p):
            beta_old[j] = beta[j]
        b0_old = b0

        inner = 0
        while inner < max_inner:
            d0, ch0 = _intercept_step(v, r)
            b0 += d0
            ch = max(ch0, _sweep(XT, v, r, beta, a, l1, l2, all_cols, p))
            inner += 1
            if ch < tol:
                break
            nact = 0
            for j in range(p):
                if beta[j] != 0.0:
                    active[nact] = j
                    nact += 1
            while inner < max_inner:
                d0, ch0 = _intercept_step(v, r)
                b0 += d0
                cha = max(ch0, _sweep(XT, v, r, beta, a, l1, l2, active, nact))
                inner += 1
                if cha < tol:
                    break
        passes += inner

        _eta(X, b0, beta, eta)
        f_new = objective(X, y, m, inv_n, b0, beta, l1, l2)
        halvings = 0
        while f_new > f_old + 1e-13 * (1.0 + abs(f_old)) and halvings < 40:
            b0 = 0.5 * (b0 + b0_old)
            for j in range(p):
                beta[j] = 0.5 * (beta[j] + beta_old[j])
            _eta(X, b0, beta, eta)
            f_new = objective(X, y, m, inv_n, b0, beta, l1, l2)
            halvings += 1

        sv = 0.0
        for i in range(n):
            sv += v[i]
        change = sv * (b0 - b0_old) ** 2
        for j in range(p):
            c = a[j] * (beta[j] - beta_old[j]) ** 2
            if c > change:
                change = c
        f_old = f_new
        if change < tol:
            return b0, outer + 1, passes, True
    return b0, max_outer, passes, False
