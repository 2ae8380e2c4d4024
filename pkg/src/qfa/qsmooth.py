"""Smoothing across quantile levels.

A natural cubic smoothing spline (penalized by the integrated squared
second derivative) is applied to sequences indexed by quantile level,
either to lag-window estimates entry by entry (lwqs) or to the transform
itself before any spectral estimation (qslw).  The smoothing parameter is
fixed or chosen by generalized cross-validation, optionally after
whitening first-order autocorrelated residuals.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .arrays import QdftArray, QSpecMatrix, enforce_conjugate_symmetry
from .errors import ValidationError

GCV_GRID_POINTS = 61
GCV_GRID_DECADES = 12.0
AR1_RHO_CAP = 0.95


@dataclass(frozen=True)
class SmootherConfig:
    """How level-wise sequences are smoothed.

    lambda_mode "fixed" uses lam as the raw penalty; "gcv" searches a
    log-spaced grid centered on the trace-normalized scale of the
    roughness matrix.  With ar1_whiten the least-squares part of the
    criterion is computed on AR(1)-whitened residuals, the coefficient
    being estimated from a pilot fit unless fixed.
    """

    lambda_mode: str = "gcv"
    lam: float | None = None
    ar1_whiten: bool = False
    ar1_rho_mode: str = "estimate"
    ar1_rho: float = 0.0

    def __post_init__(self):
        if self.lambda_mode not in ("gcv", "fixed"):
            raise ValidationError("lambda_mode must be 'gcv' or 'fixed'")
        if self.lambda_mode == "fixed":
            if self.lam is None or self.lam <= 0:
                raise ValidationError("fixed mode requires a positive lambda")
        if self.ar1_rho_mode not in ("estimate", "fixed"):
            raise ValidationError("ar1_rho_mode must be 'estimate' or 'fixed'")
        if not (-1.0 < self.ar1_rho < 1.0):
            raise ValidationError("ar1_rho must lie in (-1, 1)")


def roughness_matrix(grid):
    """Natural-cubic-spline penalty matrix K with g'Kg = integral of g''^2."""
    grid = np.asarray(grid, dtype=float)
    L = grid.size
    if L < 4:
        raise ValidationError("need at least 4 grid points")
    h = np.diff(grid)
    if np.any(h <= 0):
        raise ValidationError("grid must be strictly increasing")
    Q = np.zeros((L, L - 2))
    R = np.zeros((L - 2, L - 2))
    for j in range(1, L - 1):
        Q[j - 1, j - 1] = 1.0 / h[j - 1]
        Q[j, j - 1] = -(1.0 / h[j - 1] + 1.0 / h[j])
        Q[j + 1, j - 1] = 1.0 / h[j]
        R[j - 1, j - 1] = (h[j - 1] + h[j]) / 3.0
        if j < L - 2:
            R[j - 1, j] = h[j] / 6.0
            R[j, j - 1] = h[j] / 6.0
    return Q @ np.linalg.solve(R, Q.T)


class _GridSmoother:
    """Shared eigen-factorization of the roughness matrix for one grid."""

    def __init__(self, grid):
        self.grid = np.asarray(grid, dtype=float)
        self.L = self.grid.size
        self.K = roughness_matrix(self.grid)
        lam_k, U = np.linalg.eigh(self.K)
        self.eigvals = np.clip(lam_k, 0.0, None)
        self.U = U
        pos = self.eigvals[self.eigvals > 1e-12 * self.eigvals.max()]
        # balance point between fidelity and penalty; centers the GCV grid
        self.lam_scale = 1.0 / float(pos.mean())

    def lambda_grid(self, decades=GCV_GRID_DECADES, points=GCV_GRID_POINTS):
        half = decades / 2.0
        return self.lam_scale * 10.0 ** np.linspace(-half, half, points)

    def fit_fixed(self, values, lam):
        """Smooth rows of values (N, L) at one penalty value."""
        coef = values @ self.U
        shrink = 1.0 / (1.0 + lam * self.eigvals)
        return (coef * shrink) @ self.U.T

    def gcv_scores(self, values, lams):
        """GCV score matrix (N rows, len(lams) columns)."""
        coef = values @ self.U  # (N, L)
        lams = np.asarray(lams, dtype=float)
        shrink = 1.0 / (1.0 + lams[:, None] * self.eigvals[None, :])  # (G, L)
        resid_fac = 1.0 - shrink
        rss = (coef[:, None, :] ** 2 * resid_fac[None, :, :] ** 2).sum(axis=2)
        tr = shrink.sum(axis=1)  # (G,)
        denom = (1.0 - tr / self.L) ** 2
        return (rss / self.L) / denom[None, :]

    def fit_gcv(self, values):
        """Per-row GCV selection; returns (smoothed, lambdas)."""
        lams = self.lambda_grid()
        scores = self.gcv_scores(values, lams)
        pick = np.argmin(scores, axis=1)
        if np.any(pick == 0) or np.any(pick == lams.size - 1):
            warnings.warn(
                "GCV selected a boundary penalty; widening the search grid",
                RuntimeWarning,
                stacklevel=2,
            )
            lams = self.lambda_grid(decades=GCV_GRID_DECADES + 8.0,
                                    points=GCV_GRID_POINTS + 20)
            scores = self.gcv_scores(values, lams)
            pick = np.argmin(scores, axis=1)
        chosen = lams[pick]
        coef = values @ self.U
        shrink = 1.0 / (1.0 + chosen[:, None] * self.eigvals[None, :])
        return (coef * shrink) @ self.U.T, chosen


def _ar1_whitening_matrix(L, rho):
    W = np.eye(L)
    W[0, 0] = np.sqrt(1.0 - rho**2)
    idx = np.arange(1, L)
    W[idx, idx - 1] = -rho
    return W


def _ar1_rho_estimate(resid):
    denom = float(np.dot(resid, resid))
    if denom <= 0.0:
        return 0.0
    rho = float(np.dot(resid[1:], resid[:-1]) / denom)
    return float(np.clip(rho, -AR1_RHO_CAP, AR1_RHO_CAP))


def _smooth_ar1(sm, values, cfg):
    """Whitened criterion, one row at a time (rho differs per row)."""
    out = np.empty_like(values)
    pilot, _ = sm.fit_gcv(values)
    for i, v in enumerate(values):
        if cfg.ar1_rho_mode == "fixed":
            rho = cfg.ar1_rho
        else:
            rho = _ar1_rho_estimate(v - pilot[i])
        W = _ar1_whitening_matrix(sm.L, rho)
        C = W.T @ W
        Lc = np.linalg.cholesky(C)
        Kt = np.linalg.solve(Lc, np.linalg.solve(Lc, sm.K).T).T
        Kt = 0.5 * (Kt + Kt.T)
        evals, U = np.linalg.eigh(Kt)
        evals = np.clip(evals, 0.0, None)
        u0 = U.T @ (Lc.T @ v)
        if cfg.lambda_mode == "fixed":
            lam = cfg.lam
        else:
            lams = sm.lambda_grid()
            shrink = 1.0 / (1.0 + lams[:, None] * evals[None, :])
            rss = ((u0[None, :] * (1.0 - shrink)) ** 2).sum(axis=1)
            tr = shrink.sum(axis=1)
            scores = (rss / sm.L) / (1.0 - tr / sm.L) ** 2
            lam = float(lams[np.argmin(scores)])
        u = U @ (u0 / (1.0 + lam * evals))
        out[i] = np.linalg.solve(Lc.T, u)
    return out


def smooth_batch(grid, values, cfg):
    """Smooth each row of values (N, L) over the common grid."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    sm = _GridSmoother(grid)
    if values.shape[1] != sm.L:
        raise ValidationError("values do not match the grid length")
    if cfg.ar1_whiten:
        return _smooth_ar1(sm, values, cfg)
    if cfg.lambda_mode == "fixed":
        return sm.fit_fixed(values, cfg.lam)
    smoothed, _ = sm.fit_gcv(values)
    return smoothed


def smooth_series(grid, values, cfg):
    """Smooth one level-indexed sequence; returns an array of the same length."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1:
        raise ValidationError("values must be 1-d; use smooth_batch for stacks")
    return smooth_batch(grid, values[None, :], cfg)[0]


def gcv_score(grid, values, lam, ar1_rho=None):
    """GCV score of one sequence at one penalty (oracle-testable)."""
    sm = _GridSmoother(grid)
    v = np.asarray(values, dtype=float)
    if ar1_rho is None:
        return float(sm.gcv_scores(v[None, :], [lam])[0, 0])
    W = _ar1_whitening_matrix(sm.L, ar1_rho)
    C = W.T @ W
    Lc = np.linalg.cholesky(C)
    Kt = np.linalg.solve(Lc, np.linalg.solve(Lc, sm.K).T).T
    evals, U = np.linalg.eigh(0.5 * (Kt + Kt.T))
    evals = np.clip(evals, 0.0, None)
    u0 = U.T @ (Lc.T @ v)
    shrink = 1.0 / (1.0 + lam * evals)
    rss = float((((1.0 - shrink) * u0) ** 2).sum())
    tr = float(shrink.sum())
    return (rss / sm.L) / (1.0 - tr / sm.L) ** 2


def lwqs(est, cfg):
    """Smooth a lag-window estimate across levels, entry by entry.

    Diagonal entries are smoothed directly; off-diagonal entries in their
    real and imaginary parts.  Hermitian symmetry is restored exactly and
    eigenvalues are floored afterwards so the result is usable in the
    divergence metric.
    """
    if est.kind != "lw-estimate":
        raise ValidationError("lwqs expects a lag-window estimate")
    L, V, m, _ = est.s.shape
    rows = []
    index = []
    for j in range(m):
        rows.append(est.s[:, :, j, j].real.T)  # (V, L)
        index.append(("d", j, j, "re"))
        for k in range(j + 1, m):
            rows.append(est.s[:, :, j, k].real.T)
            index.append(("o", j, k, "re"))
            rows.append(est.s[:, :, j, k].imag.T)
            index.append(("o", j, k, "im"))
    stacked = np.concatenate(rows, axis=0)
    smoothed = smooth_batch(est.levels, stacked, cfg)
    out = np.zeros_like(est.s)
    pos = 0
    for tag, j, k, part in index:
        block = smoothed[pos : pos + V].T  # (L, V)
        pos += V
        if tag == "d":
            out[:, :, j, j] += block
        elif part == "re":
            out[:, :, j, k] += block
            out[:, :, k, j] += block
        else:
            out[:, :, j, k] += 1j * block
            out[:, :, k, j] += -1j * block
    result = QSpecMatrix(s=out, freqs=est.freqs, levels=est.levels, kind="smoothed")
    return psd_repair(result)


def qslw(qdft_arr, cfg):
    """Smooth the transform itself across levels, then restore symmetry.

    Real and imaginary parts of every frequency column are smoothed
    independently; the zero-frequency (quantile) column is smoothed in its
    real part, without any monotonicity constraint.
    """
    if not isinstance(qdft_arr, QdftArray):
        raise ValidationError("expected a QdftArray")
    z = qdft_arr.z
    m, L, n = z.shape
    half = (n - 1) // 2
    nyq = n // 2 if n % 2 == 0 else None
    cols = list(range(half + 1)) + ([nyq] if nyq is not None else [])
    rows = []
    for j in range(m):
        rows.append(z[j, :, cols].real)  # (len(cols), L)
        rows.append(z[j, :, cols[1:]].imag)
    stacked = np.concatenate(rows, axis=0)
    smoothed = smooth_batch(qdft_arr.levels, stacked, cfg)
    out = np.zeros_like(z)
    pos = 0
    for j in range(m):
        re = smoothed[pos : pos + len(cols)]
        pos += len(cols)
        im = smoothed[pos : pos + len(cols) - 1]
        pos += len(cols) - 1
        for i, v in enumerate(cols):
            out[j, :, v] = re[i] + (1j * im[i - 1] if i > 0 else 0.0)
    return QdftArray(z=enforce_conjugate_symmetry(out), levels=qdft_arr.levels)


def psd_repair(est, floor_ratio=1e-6):
    """Floor each slice's eigenvalues at floor_ratio times its largest.

    Slices must be Hermitian; the output is Hermitian positive definite
    whenever the input has a positive leading eigenvalue.
    """
    if floor_ratio <= 0:
        raise ValidationError("floor_ratio must be positive")
    evals, evecs = np.linalg.eigh(est.s)
    lmax = evals[..., -1]
    floor = floor_ratio * np.maximum(lmax, np.finfo(float).tiny)
    clipped = np.maximum(evals, floor[..., None])
    s = np.einsum("lvjk,lvk,lvmk->lvjm", evecs, clipped, np.conj(evecs))
    return QSpecMatrix(s=s, freqs=est.freqs, levels=est.levels, kind=est.kind)
