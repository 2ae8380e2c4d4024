"""Compiled interior-point loop for spline quantile regression.

Identical iteration to qfa.sqr.solve_sqr's reference path; products with
the stacked constraint matrix use its level-block structure and all
scratch space is allocated once up front.
"""

import numpy as np
from numba import njit

from ._fnb import _chol_solve

STEP_DAMPING = 0.9995
STALL_STEP = 0.1
STALL_SIGMA = 0.8

STATUS_OK = 0
STATUS_MAX_ITER = 1
STATUS_SINGULAR = 2


@njit(cache=True)
def _beta_at_levels(phi, theta, p, K, out):
    """out[l, j] = sum_k phi[l, k] * theta[j*K + k]."""
    L = phi.shape[0]
    for l in range(L):
        for j in range(p):
            v = 0.0
            for k in range(K):
                v += phi[l, k] * theta[j * K + k]
            out[l, j] = v


@njit(cache=True)
def _primal_matvec(X, phi, phi_dd, c2, theta, p, K, beta, outm, outp):
    """D theta split into (L, n) data rows and (L, p) curvature rows."""
    L, n = phi.shape[0], X.shape[0]
    _beta_at_levels(phi, theta, p, K, beta)
    for l in range(L):
        for t in range(n):
            v = 0.0
            for j in range(p):
                v += beta[l, j] * X[t, j]
            outm[l, t] = v
    for l in range(L):
        for j in range(p):
            v = 0.0
            for k in range(K):
                v += phi_dd[l, k] * theta[j * K + k]
            outp[l, j] = c2[l] * v


@njit(cache=True)
def _dual_matvec(X, phi, phi_dd, c2, vm, vp, p, K, scratch_lp, out):
    """out = D'v for v split into (L, n) and (L, p) parts."""
    L, n = phi.shape[0], X.shape[0]
    for l in range(L):
        for j in range(p):
            v = 0.0
            for t in range(n):
                v += vm[l, t] * X[t, j]
            scratch_lp[l, j] = v
    for i in range(p * K):
        out[i] = 0.0
    for l in range(L):
        for j in range(p):
            g = scratch_lp[l, j]
            cv = c2[l] * vp[l, j]
            for k in range(K):
                out[j * K + k] += g * phi[l, k] + cv * phi_dd[l, k]


@njit(cache=True)
def _structured_gram(X, phi, phi_dd, c2, qm, qp, p, K, xqx, G):
    """G = D' diag(q) D via per-level p x p inner products."""
    L, n = phi.shape[0], X.shape[0]
    pK = p * K
    for i in range(pK):
        for j in range(pK):
            G[i, j] = 0.0
    for l in range(L):
        for i in range(p):
            for j in range(i + 1):
                v = 0.0
                for t in range(n):
                    v += qm[l, t] * X[t, i] * X[t, j]
                xqx[i, j] = v
                xqx[j, i] = v
        # data blocks: G[(i,a),(j,b)] += xqx[i,j] * phi[l,a] * phi[l,b]
        for i in range(p):
            for j in range(p):
                x_ij = xqx[i, j]
                if x_ij == 0.0:
                    continue
                for a in range(K):
                    va = x_ij * phi[l, a]
                    if va == 0.0:
                        continue
                    row = i * K + a
                    for b in range(K):
                        G[row, j * K + b] += va * phi[l, b]
        # curvature blocks are block-diagonal in the coefficient groups
        for j in range(p):
            cq = c2[l] * c2[l] * qp[l, j]
            if cq == 0.0:
                continue
            for a in range(K):
                va = cq * phi_dd[l, a]
                if va == 0.0:
                    continue
                row = j * K + a
                for b in range(K):
                    G[row, j * K + b] += va * phi_dd[l, b]


@njit(cache=True)
def sqr_fnb(X, y, levels, phi, phi_dd, c, tol, max_iter):
    """Solve the spline QR dual LP.

    Returns (theta, obj, iters, gap, status, zeta) with zeta the stacked
    dual iterate (data rows then curvature rows) at exit."""
    n, p = X.shape
    L, K = phi.shape
    pK = p * K
    c2 = 2.0 * c

    ysum = 0.0
    for t in range(n):
        ysum += y[t]
    dual_const = 0.0
    for l in range(L):
        dual_const += (1.0 - levels[l]) * ysum

    xm = np.empty((L, n))
    sm = np.empty((L, n))
    zm = np.empty((L, n))
    wm = np.empty((L, n))
    xp = np.empty((L, p))
    sp = np.empty((L, p))
    zp = np.empty((L, p))
    wp = np.empty((L, p))
    qm = np.empty((L, n))
    qp = np.empty((L, p))
    dxm = np.empty((L, n))
    dzm = np.empty((L, n))
    dwm = np.empty((L, n))
    dxp = np.empty((L, p))
    dzp = np.empty((L, p))
    dwp = np.empty((L, p))
    cxm = np.empty((L, n))
    csm = np.empty((L, n))
    cxp = np.empty((L, p))
    csp = np.empty((L, p))
    rhm = np.empty((L, n))
    rhp = np.empty((L, p))
    avm = np.empty((L, n))
    avp = np.empty((L, p))
    beta = np.empty((L, p))
    scratch_lp = np.empty((L, p))
    xqx = np.empty((p, p))
    G = np.empty((pK, pK))
    Gc = np.empty((pK, pK))
    rhs = np.empty(pK)
    dy = np.empty(pK)
    yy = np.empty(pK)
    theta = np.empty(pK)

    for l in range(L):
        for t in range(n):
            xm[l, t] = 1.0 - levels[l]
            sm[l, t] = levels[l]
            qm[l, t] = 1.0
        for j in range(p):
            xp[l, j] = 0.5
            sp[l, j] = 0.5
            qp[l, j] = 1.0

    # least-squares start for the multipliers: (D'D) yy = D'c, c = -b
    _structured_gram(X, phi, phi_dd, c2, qm, qp, p, K, xqx, G)
    for l in range(L):
        for t in range(n):
            dxm[l, t] = -y[t]
        for j in range(p):
            dxp[l, j] = 0.0
    _dual_matvec(X, phi, phi_dd, c2, dxm, dxp, p, K, scratch_lp, rhs)
    zeta_out = np.empty(L * n + L * p)
    if not _chol_solve(G, rhs, yy):
        theta[:] = 0.0
        return theta, 0.0, 0, np.inf, STATUS_SINGULAR, zeta_out
    _primal_matvec(X, phi, phi_dd, c2, yy, p, K, beta, avm, avp)
    rmax = 0.0
    for l in range(L):
        for t in range(n):
            r = -y[t] - avm[l, t]
            zm[l, t] = r
            if abs(r) > rmax:
                rmax = abs(r)
        for j in range(p):
            r = -avp[l, j]
            zp[l, j] = r
            if abs(r) > rmax:
                rmax = abs(r)
    eps0 = 1e-1 * (1.0 + rmax)
    for l in range(L):
        for t in range(n):
            r = zm[l, t]
            zi = (r if r > 0.0 else 0.0) + eps0
            zm[l, t] = zi
            wm[l, t] = zi - r
        for j in range(p):
            r = zp[l, j]
            zi = (r if r > 0.0 else 0.0) + eps0
            zp[l, j] = zi
            wp[l, j] = zi - r

    it = 0
    recenter = False
    while True:
        # penalized objective at theta = -yy and the adjusted dual value
        for i in range(pK):
            theta[i] = -yy[i]
        _beta_at_levels(phi, theta, p, K, beta)
        obj = 0.0
        dual = -dual_const
        for l in range(L):
            al = levels[l]
            for t in range(n):
                r = y[t]
                for j in range(p):
                    r -= beta[l, j] * X[t, j]
                obj += al * r if r >= 0.0 else (al - 1.0) * r
                dual += y[t] * xm[l, t]
            cl = c[l]
            for j in range(p):
                v = 0.0
                for k in range(K):
                    v += phi_dd[l, k] * theta[j * K + k]
                obj += cl * (v if v >= 0.0 else -v)
        gap = obj - dual
        if gap <= tol * (1.0 + abs(obj)) or it >= max_iter:
            pos = 0
            for l in range(L):
                for t in range(n):
                    zeta_out[pos] = xm[l, t]
                    pos += 1
            for l in range(L):
                for j in range(p):
                    zeta_out[pos] = xp[l, j]
                    pos += 1
            if gap <= tol * (1.0 + abs(obj)):
                return theta, obj, it, (gap if gap > 0.0 else 0.0), STATUS_OK, zeta_out
            return theta, obj, it, gap, STATUS_MAX_ITER, zeta_out
        it += 1

        mu = 0.0
        for l in range(L):
            for t in range(n):
                qm[l, t] = 1.0 / (zm[l, t] / xm[l, t] + wm[l, t] / sm[l, t])
                mu += xm[l, t] * zm[l, t] + sm[l, t] * wm[l, t]
            for j in range(p):
                qp[l, j] = 1.0 / (zp[l, j] / xp[l, j] + wp[l, j] / sp[l, j])
                mu += xp[l, j] * zp[l, j] + sp[l, j] * wp[l, j]

        _structured_gram(X, phi, phi_dd, c2, qm, qp, p, K, xqx, G)
        for i in range(pK):
            for j in range(pK):
                Gc[i, j] = G[i, j]

        # predictor
        for l in range(L):
            for t in range(n):
                dxm[l, t] = qm[l, t] * (zm[l, t] - wm[l, t])
            for j in range(p):
                dxp[l, j] = qp[l, j] * (zp[l, j] - wp[l, j])
        _dual_matvec(X, phi, phi_dd, c2, dxm, dxp, p, K, scratch_lp, rhs)
        if not _chol_solve(G, rhs, dy):
            return theta, obj, it, gap, STATUS_SINGULAR, zeta_out
        _primal_matvec(X, phi, phi_dd, c2, dy, p, K, beta, avm, avp)
        mp = 0.0
        md = 0.0
        for l in range(L):
            for t in range(n):
                rv = zm[l, t] - wm[l, t]
                dxt = qm[l, t] * (avm[l, t] - rv)
                dxm[l, t] = dxt
                dzt = -zm[l, t] - zm[l, t] / xm[l, t] * dxt
                dwt = -wm[l, t] + wm[l, t] / sm[l, t] * dxt
                dzm[l, t] = dzt
                dwm[l, t] = dwt
                rp_ = -dxt / xm[l, t] if dxt < 0.0 else dxt / sm[l, t]
                if rp_ > mp:
                    mp = rp_
                rd = -dzt / zm[l, t] if dzt < 0.0 else 0.0
                rd2 = -dwt / wm[l, t] if dwt < 0.0 else 0.0
                if rd > md:
                    md = rd
                if rd2 > md:
                    md = rd2
            for j in range(p):
                rv = zp[l, j] - wp[l, j]
                dxt = qp[l, j] * (avp[l, j] - rv)
                dxp[l, j] = dxt
                dzt = -zp[l, j] - zp[l, j] / xp[l, j] * dxt
                dwt = -wp[l, j] + wp[l, j] / sp[l, j] * dxt
                dzp[l, j] = dzt
                dwp[l, j] = dwt
                rp_ = -dxt / xp[l, j] if dxt < 0.0 else dxt / sp[l, j]
                if rp_ > mp:
                    mp = rp_
                rd = -dzt / zp[l, j] if dzt < 0.0 else 0.0
                rd2 = -dwt / wp[l, j] if dwt < 0.0 else 0.0
                if rd > md:
                    md = rd
                if rd2 > md:
                    md = rd2
        ap = min(1.0, STEP_DAMPING / mp) if mp > 0.0 else 1.0
        ad = min(1.0, STEP_DAMPING / md) if md > 0.0 else 1.0

        mu_aff = 0.0
        for l in range(L):
            for t in range(n):
                mu_aff += (xm[l, t] + ap * dxm[l, t]) * (zm[l, t] + ad * dzm[l, t])
                mu_aff += (sm[l, t] - ap * dxm[l, t]) * (wm[l, t] + ad * dwm[l, t])
            for j in range(p):
                mu_aff += (xp[l, j] + ap * dxp[l, j]) * (zp[l, j] + ad * dzp[l, j])
                mu_aff += (sp[l, j] - ap * dxp[l, j]) * (wp[l, j] + ad * dwp[l, j])
        sig = mu_aff / mu
        sig = sig * sig * sig
        if recenter and sig < STALL_SIGMA:
            sig = STALL_SIGMA
        target = sig * mu / (2.0 * (n * L + p * L))

        # corrector
        for l in range(L):
            for t in range(n):
                xi = 1.0 / xm[l, t]
                si = 1.0 / sm[l, t]
                cxm[l, t] = dxm[l, t] * dzm[l, t] * xi
                csm[l, t] = -dxm[l, t] * dwm[l, t] * si
                rh = (zm[l, t] - wm[l, t]) - target * (xi - si) + cxm[l, t] - csm[l, t]
                rhm[l, t] = rh
                dxm[l, t] = qm[l, t] * rh
            for j in range(p):
                xi = 1.0 / xp[l, j]
                si = 1.0 / sp[l, j]
                cxp[l, j] = dxp[l, j] * dzp[l, j] * xi
                csp[l, j] = -dxp[l, j] * dwp[l, j] * si
                rh = (zp[l, j] - wp[l, j]) - target * (xi - si) + cxp[l, j] - csp[l, j]
                rhp[l, j] = rh
                dxp[l, j] = qp[l, j] * rh
        _dual_matvec(X, phi, phi_dd, c2, dxm, dxp, p, K, scratch_lp, rhs)
        if not _chol_solve(Gc, rhs, dy):
            return theta, obj, it, gap, STATUS_SINGULAR, zeta_out
        _primal_matvec(X, phi, phi_dd, c2, dy, p, K, beta, avm, avp)
        mp = 0.0
        md = 0.0
        for l in range(L):
            for t in range(n):
                xi = 1.0 / xm[l, t]
                si = 1.0 / sm[l, t]
                dxt = qm[l, t] * (avm[l, t] - rhm[l, t])
                dxm[l, t] = dxt
                dzt = target * xi - zm[l, t] - zm[l, t] * xi * dxt - cxm[l, t]
                dwt = target * si - wm[l, t] + wm[l, t] * si * dxt - csm[l, t]
                dzm[l, t] = dzt
                dwm[l, t] = dwt
                rp_ = -dxt * xi if dxt < 0.0 else dxt * si
                if rp_ > mp:
                    mp = rp_
                rd = -dzt / zm[l, t] if dzt < 0.0 else 0.0
                rd2 = -dwt / wm[l, t] if dwt < 0.0 else 0.0
                if rd > md:
                    md = rd
                if rd2 > md:
                    md = rd2
            for j in range(p):
                xi = 1.0 / xp[l, j]
                si = 1.0 / sp[l, j]
                dxt = qp[l, j] * (avp[l, j] - rhp[l, j])
                dxp[l, j] = dxt
                dzt = target * xi - zp[l, j] - zp[l, j] * xi * dxt - cxp[l, j]
                dwt = target * si - wp[l, j] + wp[l, j] * si * dxt - csp[l, j]
                dzp[l, j] = dzt
                dwp[l, j] = dwt
                rp_ = -dxt * xi if dxt < 0.0 else dxt * si
                if rp_ > mp:
                    mp = rp_
                rd = -dzt / zp[l, j] if dzt < 0.0 else 0.0
                rd2 = -dwt / wp[l, j] if dwt < 0.0 else 0.0
                if rd > md:
                    md = rd
                if rd2 > md:
                    md = rd2
        ap = min(1.0, STEP_DAMPING / mp) if mp > 0.0 else 1.0
        ad = min(1.0, STEP_DAMPING / md) if md > 0.0 else 1.0
        recenter = min(ap, ad) < STALL_STEP

        for l in range(L):
            for t in range(n):
                xm[l, t] += ap * dxm[l, t]
                sm[l, t] -= ap * dxm[l, t]
                zm[l, t] += ad * dzm[l, t]
                wm[l, t] += ad * dwm[l, t]
            for j in range(p):
                xp[l, j] += ap * dxp[l, j]
                sp[l, j] -= ap * dxp[l, j]
                zp[l, j] += ad * dzp[l, j]
                wp[l, j] += ad * dwp[l, j]
        for i in range(pK):
            yy[i] += ad * dy[i]
