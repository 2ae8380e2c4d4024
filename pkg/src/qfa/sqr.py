"""Spline quantile regression: all quantile levels fit jointly.

Regression coefficients are cubic-spline functions of the quantile level,
penalized by the L1 norm of their second derivatives.  The problem is a
linear program solved in its bounded-variable dual form

    max { b'zeta : D'zeta = a, zeta in [0,1]^(nL+pL) },

where D stacks one design block per level followed by one curvature block
per level.  The interior-point iteration is the same predictor-corrector
scheme as qfa.qr, but every product with D uses the block structure, so
the cost per iteration is driven by n*L rather than (n*L)*(p*K).
"""

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NumericError, SolverError, ValidationError
from .qr import STALL_SIGMA, STALL_STEP, STEP_DAMPING, DEFAULT_TOL
from .splines import SplineBasis, build_spline_basis

try:
    from . import _sqr_fnb
except ImportError:  # pragma: no cover - numba genuinely missing
    _sqr_fnb = None

# The joint problems are larger than single-level fits and occasionally
# need more centering steps, hence the higher cap.
SQR_MAX_ITER = 100


@dataclass(frozen=True)
class PenaltyPlan:
    """Per-level curvature penalty constants.

    c0 = exp(mu - 8); c[l] = c0 * n * L * w[l] / sum_l' || w[l'] ddPhi(a_l') ||_1,
    the norm summing absolute entries of the stacked second-derivative
    blocks (p identical rows per level).
    """

    mu: float
    c0: float
    weights: np.ndarray  # (L,)
    c: np.ndarray  # (L,)


def penalty_weights(levels, weighted):
    levels = np.asarray(levels, dtype=float)
    if weighted:
        return 0.25 / (levels * (1.0 - levels))
    return np.ones_like(levels)


def penalty_plan(levels, n, p, basis, mu, weighted=False):
    """Assemble the penalty constants for an SQR problem."""
    levels = np.asarray(levels, dtype=float)
    if basis.levels.shape != levels.shape or not np.array_equal(basis.levels, levels):
        raise ValidationError("basis was built on a different level grid")
    L = levels.size
    w = penalty_weights(levels, weighted)
    c0 = float(np.exp(mu - 8.0))
    # entrywise L1 norm of the p-row curvature block at each level
    denom = float(p * np.sum(w * np.abs(basis.phi_dd).sum(axis=1)))
    if denom <= 0.0:
        raise NumericError("curvature blocks are identically zero")
    c = c0 * n * L * w / denom
    return PenaltyPlan(mu=float(mu), c0=c0, weights=w, c=c)


@dataclass(frozen=True)
class SqrProblem:
    """Dual-LP data for one spline quantile regression."""

    X: np.ndarray  # (n, p)
    y: np.ndarray  # (n,)
    basis: SplineBasis
    penalty: PenaltyPlan
    a: np.ndarray  # (p*K,) equality right-hand side
    b: np.ndarray  # (n*L + p*L,) dual objective vector

    @property
    def dims(self):
        n, p = self.X.shape
        return n, p, self.basis.K, self.basis.levels.size

    @cached_property
    def D(self):
        """Explicit dual constraint matrix; only built on demand."""
        n, p, K, L = self.dims
        phi, phi_dd = self.basis.phi, self.basis.phi_dd
        D = np.empty((n * L + p * L, p * K))
        for el in range(L):
            D[el * n : (el + 1) * n] = np.kron(self.X, phi[el : el + 1])
        eye = np.eye(p)
        for el in range(L):
            block = 2.0 * self.penalty.c[el] * np.kron(eye, phi_dd[el : el + 1])
            D[n * L + el * p : n * L + (el + 1) * p] = block
        return D


def assemble_sqr(data, basis, plan):
    """Build the dual-LP vectors a and b for (data, basis, plan)."""
    n, p = data.n, data.p
    L = basis.levels.size
    if plan.c.shape[0] != L:
        raise ValidationError("penalty plan does not match the level grid")
    xt1 = data.X.sum(axis=0)  # (p,)
    s1 = (1.0 - basis.levels) @ basis.phi  # (K,)
    s2 = plan.c @ basis.phi_dd  # (K,)
    a = (np.outer(xt1, s1) + s2[None, :]).ravel()
    b = np.concatenate([np.tile(data.y, L), np.zeros(p * L)])
    return SqrProblem(X=data.X, y=data.y, basis=basis, penalty=plan, a=a, b=b)


@dataclass(frozen=True)
class SqrSolution:
    theta: np.ndarray  # (p*K,)
    beta_at_levels: np.ndarray  # (L, p)
    objective: float
    duality_gap: float
    iterations: int
    zeta: np.ndarray = None  # (n*L + p*L,) dual iterate at convergence


def beta_from_theta(basis, theta, p):
    """beta(levels) = Phi(level) theta, one row per level."""
    theta_mat = np.asarray(theta).reshape(p, basis.K)
    return basis.phi @ theta_mat.T


def sqr_objective(data, basis, plan, theta):
    """Penalized objective: summed check losses plus L1 curvature terms."""
    beta = beta_from_theta(basis, theta, data.p)  # (L, p)
    resid = data.y[None, :] - beta @ data.X.T  # (L, n)
    alphas = basis.levels
    loss = float(np.sum(resid * (alphas[:, None] - (resid < 0))))
    theta_mat = np.asarray(theta).reshape(data.p, basis.K)
    curv = basis.phi_dd @ theta_mat.T  # (L, p)
    return loss + float(plan.c @ np.abs(curv).sum(axis=1))


def _dual_matvec(prob, vm, vp):
    """D'v for v split into its (L, n) main and (L, p) penalty parts."""
    phi, phi_dd = prob.basis.phi, prob.basis.phi_dd
    G = vm @ prob.X  # (L, p)
    out = np.einsum("lj,lk->jk", G, phi)
    out += np.einsum("lj,lk->jk", (2.0 * prob.penalty.c)[:, None] * vp, phi_dd)
    return out.ravel()


def _primal_matvec(prob, theta):
    """D theta as its (L, n) main and (L, p) penalty parts."""
    n, p, K, L = prob.dims
    beta = beta_from_theta(prob.basis, theta, p)  # (L, p)
    main = beta @ prob.X.T  # (L, n)
    pen = (2.0 * prob.penalty.c)[:, None] * (prob.basis.phi_dd @ theta.reshape(p, K).T)
    return main, pen


def _structured_gram(prob, qm, qp):
    """D' diag(q) D using the level-block structure."""
    n, p, K, L = prob.dims
    phi, phi_dd = prob.basis.phi, prob.basis.phi_dd
    XQX = np.einsum("tj,lt,tk->ljk", prob.X, qm, prob.X, optimize=True)
    gram = np.einsum("ljk,la,lb->jakb", XQX, phi, phi, optimize=True)
    diag = np.einsum(
        "lj,la,lb->jab", (4.0 * prob.penalty.c**2)[:, None] * qp, phi_dd, phi_dd,
        optimize=True,
    )
    j = np.arange(p)
    gram[j, :, j, :] += diag
    return gram.reshape(p * K, p * K)


def initial_zeta(prob):
    """Paper-prescribed interior start: (1-a_l) on data rows, 1/2 on
    curvature rows; exactly feasible for the equality constraints."""
    n, p, K, L = prob.dims
    zm = np.repeat((1.0 - prob.basis.levels)[:, None], n, axis=1)
    zp = np.full((L, p), 0.5)
    return zm, zp


def solve_sqr(problem, tol=DEFAULT_TOL, max_iter=SQR_MAX_ITER, engine=None):
    """Interior-point solve of the assembled problem.

    Convergence is declared on the true objective gap: the penalized
    check-loss objective at theta minus the adjusted dual objective.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    n, p, K, L = problem.dims
    if engine is None:
        engine = os.environ.get("QFA_ENGINE", "numba" if _sqr_fnb is not None else "numpy")
    if engine == "numba" and _sqr_fnb is not None:
        theta, obj, iters, gap, status, zeta = _sqr_fnb.sqr_fnb(
            np.ascontiguousarray(problem.X),
            np.ascontiguousarray(problem.y),
            np.ascontiguousarray(problem.basis.levels),
            np.ascontiguousarray(problem.basis.phi),
            np.ascontiguousarray(problem.basis.phi_dd),
            np.ascontiguousarray(problem.penalty.c),
            float(tol),
            int(max_iter),
        )
        if status == _sqr_fnb.STATUS_SINGULAR:
            raise NumericError("singular normal matrix in SQR step")
        if status == _sqr_fnb.STATUS_MAX_ITER:
            raise SolverError(
                f"spline quantile regression failed to converge "
                f"(gap {gap:.3e} after {max_iter} iterations)",
                last_iterate=theta,
                gap=float(gap),
            )
        return SqrSolution(
            theta=theta,
            beta_at_levels=beta_from_theta(problem.basis, theta, p),
            objective=float(obj),
            duality_gap=float(gap),
            iterations=int(iters),
            zeta=zeta,
        )
    X, y = problem.X, problem.y
    alphas = problem.basis.levels
    a = problem.a
    ysum = float(y.sum())
    dual_const = float(np.sum(1.0 - alphas) * ysum)

    xm, xp = initial_zeta(problem)
    sm, sp = 1.0 - xm, 1.0 - xp

    # Multipliers start at the least-squares solution of D'theta ~ c.
    gram0 = _structured_gram(problem, np.ones_like(xm), np.ones_like(xp))
    cm = -np.tile(y, L).reshape(L, n)
    cp = np.zeros((L, p))
    rhs0 = _dual_matvec(problem, cm, cp)
    try:
        th = cho_solve(cho_factor(gram0), rhs0)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular spline design") from exc
    mvm, mvp = _primal_matvec(problem, th)
    r0m, r0p = cm - mvm, cp - mvp
    eps0 = 1e-1 * (1.0 + max(np.abs(r0m).max(), np.abs(r0p).max()))
    zm = np.maximum(r0m, 0.0) + eps0
    zp_ = np.maximum(r0p, 0.0) + eps0
    wm = zm - r0m
    wp = zp_ - r0p
    yy = th.copy()

    def primal_dual_gap():
        theta = -yy
        obj = sqr_objective_from_parts(problem, theta)
        dual = float(np.sum(xm * y[None, :])) - dual_const
        return obj, dual, theta

    def sqr_objective_from_parts(prob, theta):
        beta = beta_from_theta(prob.basis, theta, p)
        resid = y[None, :] - beta @ X.T
        loss = float(np.sum(resid * (alphas[:, None] - (resid < 0))))
        curv = prob.basis.phi_dd @ theta.reshape(p, K).T
        return loss + float(prob.penalty.c @ np.abs(curv).sum(axis=1))

    niter = 0
    recenter = False
    while True:
        obj, dual, theta = primal_dual_gap()
        gap = obj - dual
        if gap <= tol * (1.0 + abs(obj)):
            return SqrSolution(
                theta=theta,
                beta_at_levels=beta_from_theta(problem.basis, theta, p),
                objective=obj,
                duality_gap=max(gap, 0.0),
                iterations=niter,
                zeta=np.concatenate([xm.ravel(), xp.ravel()]),
            )
        if niter >= max_iter:
            raise SolverError(
                f"spline quantile regression failed to converge "
                f"(gap {gap:.3e} after {max_iter} iterations)",
                last_iterate=-yy,
                gap=float(gap),
            )
        niter += 1

        xm_i, xp_i = 1.0 / xm, 1.0 / xp
        sm_i, sp_i = 1.0 / sm, 1.0 / sp
        qm = 1.0 / (zm * xm_i + wm * sm_i)
        qp = 1.0 / (zp_ * xp_i + wp * sp_i)
        rm = zm - wm
        rp = zp_ - wp

        gram = _structured_gram(problem, qm, qp)
        try:
            factor = cho_factor(gram)
        except np.linalg.LinAlgError as exc:
            raise NumericError("singular normal matrix in SQR step") from exc

        dy = cho_solve(factor, _dual_matvec(problem, qm * rm, qp * rp))
        am, ap_ = _primal_matvec(problem, dy)
        dxm = qm * (am - rm)
        dxp = qp * (ap_ - rp)
        dzm = -zm - zm * xm_i * dxm
        dzp = -zp_ - zp_ * xp_i * dxp
        dwm = -wm + wm * sm_i * dxm
        dwp = -wp + wp * sp_i * dxp

        a_p = _joint_step(xm, dxm, xp, dxp, sm, -dxm, sp, -dxp)
        a_d = _joint_step(zm, dzm, zp_, dzp, wm, dwm, wp, dwp)

        mu = float(np.sum(xm * zm + sm * wm) + np.sum(xp * zp_ + sp * wp))
        mu_aff = float(
            np.sum((xm + a_p * dxm) * (zm + a_d * dzm))
            + np.sum((sm - a_p * dxm) * (wm + a_d * dwm))
            + np.sum((xp + a_p * dxp) * (zp_ + a_d * dzp))
            + np.sum((sp - a_p * dxp) * (wp + a_d * dwp))
        )
        sigma = (mu_aff / mu) ** 3
        if recenter:
            sigma = max(sigma, STALL_SIGMA)
        target = sigma * mu / (2.0 * (n * L + p * L))

        cxm = dxm * dzm * xm_i
        cxp = dxp * dzp * xp_i
        csm = -dxm * dwm * sm_i
        csp = -dxp * dwp * sp_i
        rhm = rm - target * (xm_i - sm_i) + cxm - csm
        rhp = rp - target * (xp_i - sp_i) + cxp - csp

        dy = cho_solve(factor, _dual_matvec(problem, qm * rhm, qp * rhp))
        am, ap_ = _primal_matvec(problem, dy)
        dxm = qm * (am - rhm)
        dxp = qp * (ap_ - rhp)
        dzm = target * xm_i - zm - zm * xm_i * dxm - cxm
        dzp = target * xp_i - zp_ - zp_ * xp_i * dxp - cxp
        dwm = target * sm_i - wm + wm * sm_i * dxm - csm
        dwp = target * sp_i - wp + wp * sp_i * dxp - csp

        a_p = _joint_step(xm, dxm, xp, dxp, sm, -dxm, sp, -dxp)
        a_d = _joint_step(zm, dzm, zp_, dzp, wm, dwm, wp, dwp)
        recenter = min(a_p, a_d) < STALL_STEP

        xm += a_p * dxm
        xp += a_p * dxp
        sm -= a_p * dxm
        sp -= a_p * dxp
        zm += a_d * dzm
        zp_ += a_d * dzp
        wm += a_d * dwm
        wp += a_d * dwp
        yy += a_d * dy


def _joint_step(a1, d1, a2, d2, b1, e1, b2, e2):
    """Damped max step keeping all four variable groups positive."""
    m = 0.0
    for arr, darr in ((a1, d1), (a2, d2), (b1, e1), (b2, e2)):
        neg = darr < 0
        if np.any(neg):
            m = max(m, float(np.max(-darr[neg] / arr[neg])))
    return min(1.0, STEP_DAMPING / m) if m > 0.0 else 1.0


def solve_sqr_for_design(X, y, levels, mu, weighted=False, max_knots=None,
                         tol=DEFAULT_TOL, max_iter=SQR_MAX_ITER):
    """Convenience wrapper: basis + plan + assembly + solve in one call."""
    from .qr import RegressionData

    data = RegressionData(np.asarray(X, float), np.asarray(y, float))
    basis = build_spline_basis(levels, max_knots=max_knots)
    plan = penalty_plan(levels, data.n, data.p, basis, mu, weighted=weighted)
    problem = assemble_sqr(data, basis, plan)
    return solve_sqr(problem, tol=tol, max_iter=max_iter)
