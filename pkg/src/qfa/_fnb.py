"""Allocation-free batched interior-point kernel (numba).

Same algorithm as qfa.qr.solve_qr_levels: Mehrotra predictor-corrector on
the box-constrained dual LP, one problem per quantile level, all sharing
the design matrix.  Written as plain loops so the whole iteration runs
without temporary arrays; problems freeze individually once their own
duality-gap criterion is met, so results match the reference path.

The design matrix is kept transposed (p, n) so every inner loop runs over
contiguous memory; reciprocals of the iterate are computed once per
iteration because division throughput dominates the arithmetic.
"""

import numpy as np
from numba import njit

STEP_DAMPING = 0.9995
# stall safeguard: recenter strongly after a collapsed corrector step
STALL_STEP = 0.1
STALL_SIGMA = 0.8
# once the relative gap is inside this zone, try finishing on the exact
# vertex identified by the p smallest residuals
POLISH_ZONE = 1e-3

STATUS_OK = 0
STATUS_MAX_ITER = 1
STATUS_SINGULAR = 2


@njit(cache=True)
def _lu_factor(A, piv):
    """In-place LU with partial pivoting; False when numerically singular."""
    p = A.shape[0]
    for k in range(p):
        mx = abs(A[k, k])
        mi = k
        for i in range(k + 1, p):
            if abs(A[i, k]) > mx:
                mx = abs(A[i, k])
                mi = i
        if mx < 1e-13:
            return False
        piv[k] = mi
        if mi != k:
            for j in range(p):
                tmp = A[k, j]
                A[k, j] = A[mi, j]
                A[mi, j] = tmp
        for i in range(k + 1, p):
            A[i, k] /= A[k, k]
            for j in range(k + 1, p):
                A[i, j] -= A[i, k] * A[k, j]
    return True


@njit(cache=True)
def _lu_solve(A, piv, b, out):
    """Solve A0 x = b given the pivoted factorization of A0 in A."""
    p = A.shape[0]
    for i in range(p):
        out[i] = b[i]
    for k in range(p):
        if piv[k] != k:
            tmp = out[k]
            out[k] = out[piv[k]]
            out[piv[k]] = tmp
    for i in range(p):
        for j in range(i):
            out[i] -= A[i, j] * out[j]
    for i in range(p - 1, -1, -1):
        for j in range(i + 1, p):
            out[i] -= A[i, j] * out[j]
        out[i] /= A[i, i]


@njit(cache=True)
def _lu_solve_t(A, piv, b, out):
    """Solve A0' x = b given the pivoted factorization of A0 in A."""
    p = A.shape[0]
    for i in range(p):
        out[i] = b[i]
    for i in range(p):
        for j in range(i):
            out[i] -= A[j, i] * out[j]
        out[i] /= A[i, i]
    for i in range(p - 1, -1, -1):
        for j in range(i + 1, p):
            out[i] -= A[j, i] * out[j]
    for k in range(p - 1, -1, -1):
        if piv[k] != k:
            tmp = out[k]
            out[k] = out[piv[k]]
            out[piv[k]] = tmp


@njit(cache=True)
def _vertex_polish(X, y, alpha, colsum, ysum, resid, tol,
                   h, Ah, piv, bh, beta_v, r2, zeta_h):
    """Try to finish on an exact vertex with a complementary dual point.

    The p observations with the smallest current |residual| define a
    candidate basis; the exact interpolating coefficients and the matching
    box-feasible dual vertex certify optimality through the resulting
    primal-dual gap.  Returns (ok, loss, gap).
    """
    n, p = X.shape
    for slot in range(p):
        best = -1
        bestv = np.inf
        for t in range(n):
            taken = False
            for s in range(slot):
                if h[s] == t:
                    taken = True
                    break
            if taken:
                continue
            av = abs(resid[t])
            if av < bestv:
                bestv = av
                best = t
        h[slot] = best
    for i in range(p):
        for j in range(p):
            Ah[i, j] = X[h[i], j]
        bh[i] = y[h[i]]
    if not _lu_factor(Ah, piv):
        return False, 0.0, 0.0
    _lu_solve(Ah, piv, bh, beta_v)

    ymax = 0.0
    for t in range(n):
        if abs(y[t]) > ymax:
            ymax = abs(y[t])
    thr = 1e-9 * (1.0 + ymax)
    loss = 0.0
    dual = -(1.0 - alpha) * ysum
    for i in range(p):
        bh[i] = (1.0 - alpha) * colsum[i]  # rhs defect accumulator
    for t in range(n):
        r = y[t]
        for j in range(p):
            r -= X[t, j] * beta_v[j]
        r2[t] = r
        loss += alpha * r if r >= 0.0 else (alpha - 1.0) * r
        inh = False
        for s in range(p):
            if h[s] == t:
                inh = True
                break
        if inh:
            continue
        if r > thr:
            dual += y[t]
            for j in range(p):
                bh[j] -= X[t, j]
        elif r >= -thr:
            return False, 0.0, 0.0  # ambiguous zero outside the basis
    _lu_solve_t(Ah, piv, bh, zeta_h)
    for i in range(p):
        if zeta_h[i] < -1e-10 or zeta_h[i] > 1.0 + 1e-10:
            return False, 0.0, 0.0
        zi = zeta_h[i]
        if zi < 0.0:
            zi = 0.0
        elif zi > 1.0:
            zi = 1.0
        dual += y[h[i]] * zi
    gap = loss - dual
    if gap <= tol * (1.0 + abs(loss)) and gap >= -1e-9 * (1.0 + abs(loss)):
        return True, loss, (gap if gap > 0.0 else 0.0)
    return False, 0.0, 0.0


@njit(cache=True)
def _chol_solve(G, rhs, out):
    """Solve G x = rhs for SPD G in place; returns False when not PD."""
    p = G.shape[0]
    for j in range(p):
        d = G[j, j]
        for k in range(j):
            d -= G[j, k] * G[j, k]
        if d <= 0.0:
            return False
        G[j, j] = np.sqrt(d)
        for i in range(j + 1, p):
            v = G[i, j]
            for k in range(j):
                v -= G[i, k] * G[j, k]
            G[i, j] = v / G[j, j]
    for i in range(p):
        v = rhs[i]
        for k in range(i):
            v -= G[i, k] * out[k]
        out[i] = v / G[i, i]
    for i in range(p - 1, -1, -1):
        v = out[i]
        for k in range(i + 1, p):
            v -= G[k, i] * out[k]
        out[i] = v / G[i, i]
    return True


@njit(cache=True)
def _design_matvec(Xt, coef, out):
    """out[t] = sum_i Xt[i, t] * coef[i], contiguous over t."""
    p, n = Xt.shape
    for t in range(n):
        out[t] = Xt[0, t] * coef[0]
    for i in range(1, p):
        ci = coef[i]
        for t in range(n):
            out[t] += Xt[i, t] * ci

@njit(cache=True)
def fnb_batch(X, y, alphas, tol, max_iter):
    """Solve the batch; returns (beta, obj, iters, gap, status)."""
    n, p = X.shape
    B = alphas.shape[0]
    Xt = np.empty((p, n))
    for t in range(n):
        for i in range(p):
            Xt[i, t] = X[t, i]

    ysum = 0.0
    for t in range(n):
        ysum += y[t]
    colsum = np.zeros(p)
    for t in range(n):
        for i in range(p):
            colsum[i] += X[t, i]

    # vertex-polish scratch
    h_idx = np.empty(p, dtype=np.int64)
    piv = np.empty(p, dtype=np.int64)
    Ah = np.empty((p, p))
    bh = np.empty(p)
    beta_v = np.empty(p)
    r2 = np.empty(n)
    zeta_h = np.empty(p)

    x = np.empty((B, n))
    s = np.empty((B, n))
    z = np.empty((B, n))
    w = np.empty((B, n))
    yy = np.empty((B, p))
    xinv = np.empty(n)
    sinv = np.empty(n)
    dx = np.empty(n)
    dz = np.empty(n)
    dw = np.empty(n)
    cx = np.empty(n)
    cs = np.empty(n)
    q = np.empty(n)
    qv = np.empty(n)
    rhat = np.empty(n)
    ady = np.empty(n)
    resid = np.empty(n)
    G = np.empty((p, p))
    Gc = np.empty((p, p))
    rhs_p = np.empty(p)
    dy = np.empty(p)
    r0 = np.empty(n)
    beta = np.empty((B, p))
    obj = np.empty(B)
    iters = np.zeros(B, dtype=np.int64)
    gap_out = np.empty(B)
    status = np.zeros(B, dtype=np.int64)
    active = np.ones(B, dtype=np.bool_)
    recenter = np.zeros(B, dtype=np.bool_)

    # Least-squares multipliers for c = -y shared by every problem.
    for i in range(p):
        for j in range(i + 1):
            v = 0.0
            for t in range(n):
                v += Xt[i, t] * Xt[j, t]
            G[i, j] = v
            G[j, i] = v
        v = 0.0
        for t in range(n):
            v -= Xt[i, t] * y[t]
        rhs_p[i] = v
    if not _chol_solve(G, rhs_p, dy):
        for b in range(B):
            status[b] = STATUS_SINGULAR
        return beta, obj, iters, gap_out, status
    _design_matvec(Xt, dy, r0)
    rmax = 0.0
    for t in range(n):
        r0[t] = -y[t] - r0[t]
        if abs(r0[t]) > rmax:
            rmax = abs(r0[t])
    eps0 = 1e-1 * (1.0 + rmax)
    for b in range(B):
        xb0 = 1.0 - alphas[b]
        for t in range(n):
            x[b, t] = xb0
            s[b, t] = alphas[b]
            zp = r0[t] if r0[t] > 0.0 else 0.0
            z[b, t] = zp + eps0
            w[b, t] = z[b, t] - r0[t]
        for i in range(p):
            yy[b, i] = dy[i]

    n_active = B
    it = 0
    while n_active > 0:
        for b in range(B):
            if not active[b]:
                continue
            # check loss at beta = -yy[b]; dual objective y'zeta - (1-a)*ysum
            _design_matvec(Xt, yy[b], resid)
            primal = 0.0
            dual = 0.0
            ab = alphas[b]
            for t in range(n):
                r = y[t] + resid[t]
                resid[t] = r
                primal += ab * r if r >= 0.0 else (ab - 1.0) * r
                dual += y[t] * x[b, t]
            dual -= (1.0 - ab) * ysum
            gap = primal - dual
            if gap <= tol * (1.0 + abs(primal)) or it >= max_iter:
                for i in range(p):
                    beta[b, i] = -yy[b, i]
                obj[b] = primal
                iters[b] = it
                if gap <= tol * (1.0 + abs(primal)):
                    gap_out[b] = gap if gap > 0.0 else 0.0
                else:
                    gap_out[b] = gap
                    status[b] = STATUS_MAX_ITER
                active[b] = False
                n_active -= 1
            elif gap <= POLISH_ZONE * (1.0 + abs(primal)):
                ok, loss_v, gap_v = _vertex_polish(
                    X, y, ab, colsum, ysum, resid, tol,
                    h_idx, Ah, piv, bh, beta_v, r2, zeta_h,
                )
                if ok:
                    for i in range(p):
                        beta[b, i] = beta_v[i]
                    obj[b] = loss_v
                    iters[b] = it
                    gap_out[b] = gap_v
                    active[b] = False
                    n_active -= 1
        if n_active == 0:
            break
        it += 1

        for b in range(B):
            if not active[b]:
                continue
            xb = x[b]
            sb = s[b]
            zb = z[b]
            wb = w[b]
            # q = 1/(z/x + w/s); normal matrix G = X' diag(q) X
            mu = 0.0
            for t in range(n):
                xi = 1.0 / xb[t]
                si = 1.0 / sb[t]
                xinv[t] = xi
                sinv[t] = si
                qt = 1.0 / (zb[t] * xi + wb[t] * si)
                q[t] = qt
                qv[t] = qt * (zb[t] - wb[t])
                mu += xb[t] * zb[t] + sb[t] * wb[t]
            for i in range(p):
                for j in range(i + 1):
                    v = 0.0
                    for t in range(n):
                        v += q[t] * Xt[i, t] * Xt[j, t]
                    G[i, j] = v
                    G[j, i] = v
                    Gc[i, j] = v
                    Gc[j, i] = v
                v = 0.0
                for t in range(n):
                    v += qv[t] * Xt[i, t]
                rhs_p[i] = v
            if not _chol_solve(G, rhs_p, dy):
                for i in range(p):
                    beta[b, i] = -yy[b, i]
                obj[b] = 0.0
                iters[b] = it
                gap_out[b] = np.inf
                status[b] = STATUS_SINGULAR
                active[b] = False
                n_active -= 1
                continue

            # affine direction; step lengths via reciprocal ratios
            _design_matvec(Xt, dy, ady)
            mp = 0.0
            md = 0.0
            for t in range(n):
                dxt = q[t] * (ady[t] - (zb[t] - wb[t]))
                dx[t] = dxt
                dzt = -zb[t] - zb[t] * xinv[t] * dxt
                dwt = -wb[t] + wb[t] * sinv[t] * dxt
                dz[t] = dzt
                dw[t] = dwt
                rp = -dxt * xinv[t] if dxt < 0.0 else dxt * sinv[t]
                if rp > mp:
                    mp = rp
                rd = -dzt / zb[t] if dzt < 0.0 else 0.0
                rd2 = -dwt / wb[t] if dwt < 0.0 else 0.0
                if rd > md:
                    md = rd
                if rd2 > md:
                    md = rd2
            ap = min(1.0, STEP_DAMPING / mp) if mp > 0.0 else 1.0
            ad = min(1.0, STEP_DAMPING / md) if md > 0.0 else 1.0

            mu_aff = 0.0
            for t in range(n):
                mu_aff += (xb[t] + ap * dx[t]) * (zb[t] + ad * dz[t])
                mu_aff += (sb[t] - ap * dx[t]) * (wb[t] + ad * dw[t])
            sig = mu_aff / mu
            sig = sig * sig * sig
            if recenter[b] and sig < STALL_SIGMA:
                sig = STALL_SIGMA
            target = sig * mu / (2.0 * n)

            # corrector: same normal matrix, updated right-hand side
            for t in range(n):
                cx[t] = dx[t] * dz[t] * xinv[t]
                cs[t] = -dx[t] * dw[t] * sinv[t]
                rh = (zb[t] - wb[t]) - target * (xinv[t] - sinv[t]) + cx[t] - cs[t]
                rhat[t] = rh
                qv[t] = q[t] * rh
            for i in range(p):
                v = 0.0
                for t in range(n):
                    v += qv[t] * Xt[i, t]
                rhs_p[i] = v
            if not _chol_solve(Gc, rhs_p, dy):
                for i in range(p):
                    beta[b, i] = -yy[b, i]
                obj[b] = 0.0
                iters[b] = it
                gap_out[b] = np.inf
                status[b] = STATUS_SINGULAR
                active[b] = False
                n_active -= 1
                continue

            _design_matvec(Xt, dy, ady)
            mp = 0.0
            md = 0.0
            for t in range(n):
                dxt = q[t] * (ady[t] - rhat[t])
                dx[t] = dxt
                dzt = target * xinv[t] - zb[t] - zb[t] * xinv[t] * dxt - cx[t]
                dwt = target * sinv[t] - wb[t] + wb[t] * sinv[t] * dxt - cs[t]
                dz[t] = dzt
                dw[t] = dwt
                rp = -dxt * xinv[t] if dxt < 0.0 else dxt * sinv[t]
                if rp > mp:
                    mp = rp
                rd = -dzt / zb[t] if dzt < 0.0 else 0.0
                rd2 = -dwt / wb[t] if dwt < 0.0 else 0.0
                if rd > md:
                    md = rd
                if rd2 > md:
                    md = rd2
            ap = min(1.0, STEP_DAMPING / mp) if mp > 0.0 else 1.0
            ad = min(1.0, STEP_DAMPING / md) if md > 0.0 else 1.0
            recenter[b] = min(ap, ad) < STALL_STEP

            for t in range(n):
                xb[t] += ap * dx[t]
                sb[t] -= ap * dx[t]
                zb[t] += ad * dz[t]
                wb[t] += ad * dw[t]
            for i in range(p):
                yy[b, i] += ad * dy[i]

    return beta, obj, iters, gap_out, status
