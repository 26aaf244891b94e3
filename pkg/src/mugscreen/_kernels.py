"""Compiled inner loops for the coordinate-descent solvers.

All kernels take ``x`` in Fortran order so column access is contiguous and
update the residual ``r = y - x @ beta`` in place alongside ``beta``.
"""
import numpy as np
from numba import njit

NEWTON_STEPS = 10


@njit(cache=True, nogil=True)
def _col_dot(x, j, r):
    s = 0.0
    for i in range(x.shape[0]):
        s += x[i, j] * r[i]
    return s


@njit(cache=True, nogil=True)
def _col_axpy(x, j, a, r):
    for i in range(x.shape[0]):
        r[i] -= a * x[i, j]


@njit(cache=True, nogil=True)
def group_objective(r, beta, offsets, members, weights, lam):
    n = r.shape[0]
    loss = 0.0
    for i in range(n):
        loss += r[i] * r[i]
    pen = 0.0
    for g in range(offsets.shape[0] - 1):
        s = 0.0
        for k in range(offsets[g], offsets[g + 1]):
            b = beta[members[k]]
            s += b * b
        pen += weights[g] * np.sqrt(s)
    return 0.5 * loss / n + lam * pen


@njit(cache=True, nogil=True)
def group_kkt(x, r, beta, offsets, members, weights, lam):
    """Largest per-group violation of the subgradient optimality condition."""
    n = x.shape[0]
    worst = 0.0
    for g in range(offsets.shape[0] - 1):
        lo, hi = offsets[g], offsets[g + 1]
        bn = 0.0
        for k in range(lo, hi):
            b = beta[members[k]]
            bn += b * b
        bn = np.sqrt(bn)
        t = lam * weights[g]
        v = 0.0
        if bn == 0.0:
            for k in range(lo, hi):
                gr = _col_dot(x, members[k], r) / n
                v += gr * gr
            v = max(0.0, np.sqrt(v) - t)
        else:
            for k in range(lo, hi):
                j = members[k]
                d = _col_dot(x, j, r) / n - t * beta[j] / bn
                v += d * d
            v = np.sqrt(v)
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _block_update(x, r, beta, lo, hi, members, w, lip, lam, buf):
    """Block proximal step on one group; returns the largest scaled change."""
    n = x.shape[0]
    un = 0.0
    for k in range(lo, hi):
        j = members[k]
        u = beta[j] + _col_dot(x, j, r) / (n * lip)
        buf[k - lo] = u
        un += u * u
    un = np.sqrt(un)
    shrink = 0.0
    if un > 0.0:
        shrink = 1.0 - lam * w / (lip * un)
        if shrink < 0.0:
            shrink = 0.0
    change = 0.0
    for k in range(lo, hi):
        j = members[k]
        new = shrink * buf[k - lo]
        delta = new - beta[j]
        if delta != 0.0:
            _col_axpy(x, j, delta, r)
            beta[j] = new
            c = abs(delta) * lip
            if c > change:
                change = c
    return change


@njit(cache=True, nogil=True)
def _is_active(beta, lo, hi, members):
    for k in range(lo, hi):
        if beta[members[k]] != 0.0:
            return True
    return False


@njit(cache=True, nogil=True)
def _restricted_obj(gram, c, b, goff, gw, lam, yy):
    q = 0.0
    a = b.shape[0]
    for i in range(a):
        s = 0.0
        for j in range(a):
            s += gram[i, j] * b[j]
        q += b[i] * (0.5 * s - c[i])
    pen = 0.0
    for g in range(goff.shape[0] - 1):
        s = 0.0
        for k in range(goff[g], goff[g + 1]):
            s += b[k] * b[k]
        pen += gw[g] * np.sqrt(s)
    return q + 0.5 * yy + lam * pen


@njit(cache=True, nogil=True)
def _chol_solve(h, rhs, shift):
    """Solve ``(h + shift I) z = rhs`` by Cholesky, raising ``shift`` until
    the factorization succeeds."""
    a = rhs.shape[0]
    lo = np.zeros((a, a))
    while True:
        ok = True
        for j in range(a):
            s = h[j, j] + shift
            for k in range(j):
                s -= lo[j, k] * lo[j, k]
            if not s > 0.0:
                ok = False
                break
            ljj = np.sqrt(s)
            lo[j, j] = ljj
            for i in range(j + 1, a):
                s = h[i, j]
                for k in range(j):
                    s -= lo[i, k] * lo[j, k]
                lo[i, j] = s / ljj
        if ok:
            break
        shift = max(shift * 100.0, 1e-12)
    z = np.empty(a)
    for i in range(a):
        s = rhs[i]
        for j in range(i):
            s -= lo[i, j] * z[j]
        z[i] = s / lo[i, i]
    for i in range(a - 1, -1, -1):
        s = z[i]
        for j in range(i + 1, a):
            s -= lo[j, i] * z[j]
        z[i] = s / lo[i, i]
    return z


@njit(cache=True, nogil=True)
def newton_active(x, y, r, beta, offsets, members, weights, lam, active, na,
                  tol, max_steps, history, nh, gfull, xty, yy):
    """Damped Newton steps on the groups in ``active[:na]``.

    ``gfull = X^T X / n``, ``xty = X^T y / n`` and ``yy = y^T y / n``.
    Inactive coefficients stay at zero, so the restricted objective equals
    the full one and the backtracking line search keeps it non-increasing.
    Returns ``(steps, nh)``.
    """
    n = x.shape[0]
    hist_cap = history.shape[0]
    a = 0
    for t in range(na):
        g = active[t]
        a += offsets[g + 1] - offsets[g]
    idx = np.empty(a, dtype=np.int64)
    goff = np.zeros(na + 1, dtype=np.int64)
    gw = np.empty(na)
    pos = 0
    for t in range(na):
        g = active[t]
        for k in range(offsets[g], offsets[g + 1]):
            idx[pos] = members[k]
            pos += 1
        goff[t + 1] = pos
        gw[t] = weights[g]
    gram = np.empty((a, a))
    c = np.empty(a)
    b = np.empty(a)
    dmax = 1.0
    for i in range(a):
        c[i] = xty[idx[i]]
        b[i] = beta[idx[i]]
        for j in range(a):
            gram[i, j] = gfull[idx[i], idx[j]]
        if gram[i, i] > dmax:
            dmax = gram[i, i]
    # keeps the system positive definite when more columns than rows are active
    ridge = 1e-9 * dmax
    f0 = _restricted_obj(gram, c, b, goff, gw, lam, yy)
    steps = 0
    while steps < max_steps:
        grad = gram @ b - c
        hess = gram.copy()
        for t in range(na):
            lo, hi = goff[t], goff[t + 1]
            bn = 0.0
            for k in range(lo, hi):
                bn += b[k] * b[k]
            bn = np.sqrt(bn)
            if bn == 0.0:
                continue
            coef = lam * gw[t] / bn
            for k in range(lo, hi):
                grad[k] += coef * b[k]
                for l in range(lo, hi):
                    hess[k, l] -= coef * b[k] * b[l] / (bn * bn)
                hess[k, k] += coef
        gmax = 0.0
        for k in range(a):
            if abs(grad[k]) > gmax:
                gmax = abs(grad[k])
        if gmax <= 0.01 * tol:
            break
        d = _chol_solve(hess, -grad, ridge)
        slope = 0.0
        for k in range(a):
            slope += grad[k] * d[k]
        if not slope < 0.0:
            break
        # a singleton coefficient reaching zero is a kink: stop there and drop it
        step = 1.0
        for t in range(na):
            k = goff[t]
            if goff[t + 1] - k == 1 and b[k] * d[k] < 0.0:
                tc = -b[k] / d[k]
                if tc < step:
                    step = tc
        accepted = False
        while step > 1e-12:
            bt = b + step * d
            for t in range(na):
                k = goff[t]
                if goff[t + 1] - k == 1 and b[k] * bt[k] <= 0.0:
                    bt[k] = 0.0
            ft = _restricted_obj(gram, c, bt, goff, gw, lam, yy)
            if ft <= f0 + 1e-4 * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        # a shrinking group near the kink of its norm makes Newton crawl; zero
        # it as soon as zero is optimal for that block with the others fixed
        dropped = False
        gb = gram @ bt
        for t in range(na):
            lo, hi = goff[t], goff[t + 1]
            if hi - lo < 2:
                continue
            old = 0.0
            new = 0.0
            for k in range(lo, hi):
                old += b[k] * b[k]
                new += bt[k] * bt[k]
            if new == 0.0 or new >= old:
                continue
            s = 0.0
            for k in range(lo, hi):
                v = gb[k] - c[k]
                for l in range(lo, hi):
                    v -= gram[k, l] * bt[l]
                s += v * v
            if np.sqrt(s) <= lam * gw[t]:
                for k in range(lo, hi):
                    for i in range(a):
                        gb[i] -= gram[i, k] * bt[k]
                    bt[k] = 0.0
                dropped = True
        if dropped:
            ft = _restricted_obj(gram, c, bt, goff, gw, lam, yy)
        b = bt
        f0 = ft
        steps += 1
        if nh < hist_cap:
            history[nh] = f0
            nh += 1
        if dropped:
            break
    if steps > 0:
        for j in range(a):
            beta[idx[j]] = b[j]
        for i in range(n):
            r[i] = y[i]
        for j in range(a):
            if b[j] != 0.0:
                col = idx[j]
                for i in range(n):
                    r[i] -= x[i, col] * b[j]
    return steps, nh


@njit(cache=True, nogil=True)
def group_bcd(x, y, r, beta, offsets, members, weights, lips, lam, tol, max_iter,
              history, newton, gfull, xty, yy):
    """Cyclic block coordinate descent, optionally with active-set Newton steps.

    Each block step minimizes the quadratic majorizer with curvature
    ``lips[g]`` (largest eigenvalue of the group Gram matrix over n), so
    the objective never increases. Stops once the KKT residual is below
    ``tol``. Returns ``(iterations, kkt, n_history)``.
    """
    d = offsets.shape[0] - 1
    mmax = 1
    for g in range(d):
        if offsets[g + 1] - offsets[g] > mmax:
            mmax = offsets[g + 1] - offsets[g]
    buf = np.empty(mmax)
    active = np.empty(d, dtype=np.int64)
    cap = history.shape[0]
    inner_tol = 0.1 * tol
    it = 0
    nh = 0
    history[nh] = group_objective(r, beta, offsets, members, weights, lam)
    nh += 1
    kkt = group_kkt(x, r, beta, offsets, members, weights, lam)
    while kkt > tol and it < max_iter:
        for g in range(d):
            _block_update(x, r, beta, offsets[g], offsets[g + 1], members,
                          weights[g], lips[g], lam, buf)
        it += 1
        if nh < cap:
            history[nh] = group_objective(r, beta, offsets, members, weights, lam)
            nh += 1
        na = 0
        for g in range(d):
            if _is_active(beta, offsets[g], offsets[g + 1], members):
                active[na] = g
                na += 1
        steps = 0
        if newton and na > 0:
            steps, nh = newton_active(x, y, r, beta, offsets, members, weights, lam,
                                      active, na, tol, min(NEWTON_STEPS, max_iter - it), history, nh,
                                      gfull, xty, yy)
            it += steps
        if steps == 0:
            while it < max_iter and na > 0:
                change = 0.0
                for a in range(na):
                    g = active[a]
                    c = _block_update(x, r, beta, offsets[g], offsets[g + 1], members,
                                      weights[g], lips[g], lam, buf)
                    if c > change:
                        change = c
                it += 1
                if nh < cap:
                    history[nh] = group_objective(r, beta, offsets, members, weights, lam)
                    nh += 1
                if change < inner_tol:
                    break
        kkt = group_kkt(x, r, beta, offsets, members, weights, lam)
    return it, kkt, nh


@njit(cache=True, nogil=True)
def lasso_objective(r, beta, lam):
    n = r.shape[0]
    loss = 0.0
    for i in range(n):
        loss += r[i] * r[i]
    return 0.5 * loss / n + lam * np.sum(np.abs(beta))


@njit(cache=True, nogil=True)
def lasso_kkt(x, r, beta, lam):
    n = x.shape[0]
    worst = 0.0
    for j in range(x.shape[1]):
        g = _col_dot(x, j, r) / n
        if beta[j] == 0.0:
            v = abs(g) - lam
        elif beta[j] > 0.0:
            v = abs(g - lam)
        else:
            v = abs(g + lam)
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _coord_update(x, r, beta, j, colsq, lam):
    n = x.shape[0]
    z = beta[j] * colsq + _col_dot(x, j, r) / n
    if z > lam:
        new = (z - lam) / colsq
    elif z < -lam:
        new = (z + lam) / colsq
    else:
        new = 0.0
    delta = new - beta[j]
    if delta != 0.0:
        _col_axpy(x, j, delta, r)
        beta[j] = new
    return abs(delta) * colsq


@njit(cache=True, nogil=True)
def lasso_cd(x, y, r, beta, colsq, lam, tol, max_iter, history, newton, gfull, xty, yy):
    """Cyclic coordinate descent with exact soft-threshold updates.

    The optional Newton phase solves the smooth problem restricted to the
    current nonzero coordinates; coordinate sweeps still decide which
    variables enter or leave.
    """
    p = x.shape[1]
    offsets = np.arange(p + 1)
    members = np.arange(p)
    weights = np.ones(p)
    active = np.empty(p, dtype=np.int64)
    cap = history.shape[0]
    inner_tol = 0.1 * tol
    it = 0
    nh = 0
    history[nh] = lasso_objective(r, beta, lam)
    nh += 1
    kkt = lasso_kkt(x, r, beta, lam)
    while kkt > tol and it < max_iter:
        for j in range(p):
            if colsq[j] > 0.0:
                _coord_update(x, r, beta, j, colsq[j], lam)
        it += 1
        if nh < cap:
            history[nh] = lasso_objective(r, beta, lam)
            nh += 1
        na = 0
        for j in range(p):
            if beta[j] != 0.0:
                active[na] = j
                na += 1
        steps = 0
        if newton and na > 0:
            steps, nh = newton_active(x, y, r, beta, offsets, members, weights, lam,
                                      active, na, tol, min(NEWTON_STEPS, max_iter - it), history, nh,
                                      gfull, xty, yy)
            it += steps
        if steps == 0:
            while it < max_iter and na > 0:
                change = 0.0
                for a in range(na):
                    j = active[a]
                    c = _coord_update(x, r, beta, j, colsq[j], lam)
                    if c > change:
                        change = c
                it += 1
                if nh < cap:
                    history[nh] = lasso_objective(r, beta, lam)
                    nh += 1
                if change < inner_tol:
                    break
        kkt = lasso_kkt(x, r, beta, lam)
    return it, kkt, nh
