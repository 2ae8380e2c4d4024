"""Quantile regression by a primal-dual interior-point method.

The solver works on the bounded-variable dual of the quantile regression
linear program,

    max { y'zeta : X'zeta = (1 - alpha) X'1,  zeta in [0,1]^n },

using Mehrotra predictor-corrector steps with log-barrier handling of the
box constraints.  Coefficients are recovered from the multipliers of the
equality constraints.  A brute-force vertex-enumeration oracle is provided
for testing on small instances.

Two interchangeable engines run the same iteration: a vectorized numpy
reference and a compiled per-problem loop (qfa._fnb).  The compiled one is
the default; set QFA_ENGINE=numpy to force the reference.
"""

import os
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import NumericError, SolverError, ValidationError

try:
    from . import _fnb
except ImportError:  # pragma: no cover - numba genuinely missing
    _fnb = None

# Step-length damping keeps iterates strictly inside the box.
STEP_DAMPING = 0.9995
DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 50
# When a corrector step collapses, the next iteration recenters strongly;
# this breaks the short cycles Mehrotra steps fall into near degenerate
# vertices.
STALL_STEP = 0.1
STALL_SIGMA = 0.8
# Within this relative gap, attempt an exact finish on the vertex spanned
# by the p smallest residuals, certified by a complementary dual point.
POLISH_ZONE = 1e-3


def _try_vertex_polish(X, y, alpha, colsum, ysum, resid, tol):
    """Exact vertex + dual-vertex certificate; None when not certifiable."""
    n, p = X.shape
    h = np.argpartition(np.abs(resid), p - 1)[:p]
    Xh = X[h]
    if abs(np.linalg.det(Xh)) < 1e-13:
        return None
    beta_v = np.linalg.solve(Xh, y[h])
    r2 = y - X @ beta_v
    loss = float(np.sum(r2 * (alpha - (r2 < 0))))
    thr = 1e-9 * (1.0 + float(np.abs(y).max()))
    outside = np.ones(n, dtype=bool)
    outside[h] = False
    pos = outside & (r2 > thr)
    if np.any(outside & (np.abs(r2) <= thr)):
        return None
    zeta_h = np.linalg.solve(Xh.T, (1.0 - alpha) * colsum - X[pos].sum(axis=0))
    if np.any(zeta_h < -1e-10) or np.any(zeta_h > 1.0 + 1e-10):
        return None
    dual = float(y[pos].sum() + y[h] @ np.clip(zeta_h, 0.0, 1.0))
    dual -= (1.0 - alpha) * ysum
    gap = loss - dual
    if gap <= tol * (1.0 + abs(loss)) and gap >= -1e-9 * (1.0 + abs(loss)):
        return beta_v, loss, max(gap, 0.0)
    return None

ORACLE_MAX_N = 12
ORACLE_MAX_P = 3


@dataclass(frozen=True)
class RegressionData:
    """Design matrix and response for one regression problem."""

    X: np.ndarray  # (n, p)
    y: np.ndarray  # (n,)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if X.ndim != 2:
            raise ValidationError("X must be a 2-d array")
        if y.ndim != 1 or y.shape[0] != X.shape[0]:
            raise ValidationError("y must be 1-d with one entry per row of X")
        if X.shape[0] < X.shape[1] or X.shape[1] < 1:
            raise ValidationError("need n >= p >= 1")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValidationError("X and y must be finite")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class QrSolution:
    beta: np.ndarray
    objective: float
    iterations: int
    duality_gap: float


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ValidationError(f"quantile level must lie in (0,1), got {alpha}")


def check_loss(residuals, alpha):
    """Sum of the asymmetric absolute-error loss over the residuals.

    A residual r contributes alpha*r when r >= 0 and (1-alpha)*|r| when
    r < 0; the total is nonnegative and vanishes only at an exact fit.
    """
    _check_alpha(alpha)
    r = np.asarray(residuals, dtype=float)
    return float(np.sum(r * (alpha - (r < 0))))


@dataclass(frozen=True)
class QrBatchSolution:
    """Solutions of one design solved at many quantile levels."""

    beta: np.ndarray  # (B, p)
    objective: np.ndarray  # (B,)
    iterations: np.ndarray  # (B,) int
    duality_gap: np.ndarray  # (B,)


def solve_qr_levels(X, y, alphas, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, engine=None):
    """Solve quantile regressions sharing (X, y) at a batch of levels.

    All levels are iterated together; each problem's trajectory depends only
    on its own state, and a problem is frozen as soon as its own duality gap
    criterion is met, so batching does not change individual results.

    Parameters
    ----------
    X : (n, p) array
        Common design matrix (full column rank).
    y : (n,) array
        Common response.
    alphas : (B,) array
        Quantile levels, each strictly inside (0, 1).
    tol : float
        Relative duality-gap tolerance: the solve stops when
        primal - dual <= tol * (1 + |primal|).
    max_iter : int
        Iteration cap; exceeding it raises SolverError.
    engine : {"numba", "numpy", None}
        None picks the compiled kernel when available.

    Returns
    -------
    QrBatchSolution
    """
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
        raise ValidationError("all quantile levels must lie in (0,1)")
    if tol <= 0:
        raise ValidationError("tol must be positive")
    if engine is None:
        engine = os.environ.get("QFA_ENGINE", "numba" if _fnb is not None else "numpy")
    if engine == "numba" and _fnb is not None:
        beta, obj, iters, gap, status = _fnb.fnb_batch(
            X, y, alphas, float(tol), int(max_iter)
        )
        if np.any(status == _fnb.STATUS_SINGULAR):
            raise NumericError("singular normal matrix in interior-point step")
        if np.any(status == _fnb.STATUS_MAX_ITER):
            bad = alphas[status == _fnb.STATUS_MAX_ITER]
            raise SolverError(
                f"quantile regression failed to converge for levels "
                f"{bad.tolist()} after {max_iter} iterations",
                last_iterate=beta,
                gap=float(np.max(gap)),
            )
        return QrBatchSolution(beta, obj, iters, gap)
    n, p = X.shape
    B = alphas.shape[0]

    # Dual LP in minimization form: min c'x, A x = rhs, 0 <= x <= 1 with
    # c = -y and A = X'.  zeta = (1-alpha) 1 is exactly feasible.
    c = -y
    colsum = X.sum(axis=0)  # X'1
    rhs = (1.0 - alphas)[:, None] * colsum[None, :]  # (B, p)
    ysum = float(y.sum())

    x = np.repeat((1.0 - alphas)[:, None], n, axis=1)  # zeta, (B, n)
    s = 1.0 - x

    # Initial multipliers from the least-squares fit of c on the design.
    XtX = X.T @ X
    try:
        yy0 = np.linalg.solve(XtX, X.T @ c)  # (p,)
    except np.linalg.LinAlgError as exc:
        raise NumericError("rank-deficient design") from exc
    yy = np.repeat(yy0[None, :], B, axis=0)  # (B, p)
    r0 = c - X @ yy0  # shared across the batch at start
    eps0 = 1e-1 * (1.0 + np.abs(r0).max())
    z = np.repeat((np.maximum(r0, 0.0) + eps0)[None, :], B, axis=0)
    w = z - r0[None, :]

    # Precomputed (n, p*p) outer products make the normal matrix one GEMM.
    XX = (X[:, :, None] * X[:, None, :]).reshape(n, p * p)

    beta_out = np.empty((B, p))
    obj_out = np.empty(B)
    iter_out = np.zeros(B, dtype=int)
    gap_out = np.empty(B)

    idx = np.arange(B)  # positions in the original batch still active
    recenter = np.zeros(B, dtype=bool)
    niter = 0
    while True:
        # Convergence bookkeeping on the active set.
        beta = -yy
        resid = y[None, :] - beta @ X.T
        primal = np.sum(resid * (alphas[idx, None] - (resid < 0)), axis=1)
        dual = -np.sum(x * c[None, :], axis=1) - (1.0 - alphas[idx]) * ysum
        gap = primal - dual
        done = gap <= tol * (1.0 + np.abs(primal))
        if np.any(done):
            d = idx[done]
            beta_out[d] = beta[done]
            obj_out[d] = primal[done]
            iter_out[d] = niter
            gap_out[d] = np.maximum(gap[done], 0.0)
        in_zone = ~done & (gap <= POLISH_ZONE * (1.0 + np.abs(primal)))
        for bi in np.flatnonzero(in_zone):
            polished = _try_vertex_polish(
                X, y, float(alphas[idx[bi]]), colsum, ysum, resid[bi], tol
            )
            if polished is not None:
                beta_out[idx[bi]], obj_out[idx[bi]], gap_out[idx[bi]] = polished
                iter_out[idx[bi]] = niter
                done[bi] = True
        if np.any(done):
            keep = ~done
            idx = idx[keep]
            if idx.size == 0:
                break
            x, s, yy, z, w = x[keep], s[keep], yy[keep], z[keep], w[keep]
            recenter = recenter[keep]
            beta, resid, primal, gap = (a[keep] for a in (beta, resid, primal, gap))
        if niter >= max_iter:
            raise SolverError(
                f"quantile regression failed to converge for levels "
                f"{alphas[idx].tolist()} after {max_iter} iterations",
                last_iterate=-yy,
                gap=float(np.max(gap)),
            )
        niter += 1

        xinv = 1.0 / x
        sinv = 1.0 / s
        q = 1.0 / (z * xinv + w * sinv)
        rvec = z - w

        try:
            gram = (q @ XX).reshape(-1, p, p)
            gram_inv = np.linalg.inv(gram)
        except np.linalg.LinAlgError as exc:
            raise NumericError("singular normal matrix in interior-point step") from exc

        # Predictor (affine scaling) direction.
        qr = q * rvec
        dy = np.einsum("bpq,bq->bp", gram_inv, qr @ X)
        dx = q * (dy @ X.T - rvec)
        dz = -z - z * xinv * dx
        dw = -w + w * sinv * dx

        ap = _step_length(x, dx, s, -dx)
        ad = _step_length(z, dz, w, dw)

        mu = np.sum(x * z + s * w, axis=1)
        mu_aff = np.sum(
            (x + ap[:, None] * dx) * (z + ad[:, None] * dz)
            + (s - ap[:, None] * dx) * (w + ad[:, None] * dw),
            axis=1,
        )
        sigma = (mu_aff / mu) ** 3
        sigma = np.where(recenter, np.maximum(sigma, STALL_SIGMA), sigma)
        target = (sigma * mu / (2 * n))[:, None]

        # Corrector direction reusing the factorized normal matrix.
        cx = dx * dz * xinv
        cs = -dx * dw * sinv
        rhat = rvec - target * (xinv - sinv) + cx - cs
        qr = q * rhat
        dy = np.einsum("bpq,bq->bp", gram_inv, qr @ X)
        dx2 = q * (dy @ X.T - rhat)
        dz2 = target * xinv - z - z * xinv * dx2 - cx
        dw2 = target * sinv - w + w * sinv * dx2 - cs

        ap = _step_length(x, dx2, s, -dx2)
        ad = _step_length(z, dz2, w, dw2)
        recenter = np.minimum(ap, ad) < STALL_STEP
        ap = ap[:, None]
        ad = ad[:, None]
        x = x + ap * dx2
        s = s - ap * dx2
        yy = yy + ad * dy
        z = z + ad * dz2
        w = w + ad * dw2

    return QrBatchSolution(beta_out, obj_out, iter_out, gap_out)


def _step_length(a, da, b, db):
    """Largest damped step keeping both nonnegative variables positive."""
    with np.errstate(divide="ignore", invalid="ignore"):
        ra = np.where(da < 0, a / -da, np.inf).min(axis=1)
        rb = np.where(db < 0, b / -db, np.inf).min(axis=1)
    return np.minimum(1.0, STEP_DAMPING * np.minimum(ra, rb))


def solve_qr(data, alpha, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Solve min_beta sum of check losses by the interior-point method.

    Returns a QrSolution whose duality gap certifies optimality: the
    objective is within tol*(1+|objective|) of the optimum.
    """
    _check_alpha(alpha)
    batch = solve_qr_levels(data.X, data.y, [alpha], tol=tol, max_iter=max_iter)
    return QrSolution(
        beta=batch.beta[0],
        objective=float(batch.objective[0]),
        iterations=int(batch.iterations[0]),
        duality_gap=float(batch.duality_gap[0]),
    )


def solve_qr_oracle(data, alpha):
    """Global minimizer by enumerating exact-fit vertex candidates.

    An optimal quantile regression interpolates p observations, so trying
    every nonsingular p-subset and keeping the best check loss finds a
    global optimum.  Only meant for small test instances.
    """
    _check_alpha(alpha)
    n, p = data.n, data.p
    if n > ORACLE_MAX_N or p > ORACLE_MAX_P:
        raise ValidationError(
            f"oracle limited to n <= {ORACLE_MAX_N}, p <= {ORACLE_MAX_P}"
        )
    X, y = data.X, data.y
    best_beta = None
    best_obj = np.inf
    for rows in combinations(range(n), p):
        sub = X[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        beta = np.linalg.solve(sub, y[list(rows)])
        obj = check_loss(y - X @ beta, alpha)
        if obj < best_obj:
            best_obj = obj
            best_beta = beta
    if best_beta is None:
        raise NumericError("no nonsingular vertex subset found")
    return QrSolution(beta=best_beta, objective=best_obj, iterations=0, duality_gap=0.0)
