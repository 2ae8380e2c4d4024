"""Quantile discrete Fourier transforms.

For each Fourier frequency in (0, pi) the transform collects the cosine
and sine coefficients of a three-regressor quantile regression; frequency
zero reduces to per-level sample quantiles (intercept-only fits) and the
Nyquist frequency, when present, to a two-regressor fit.  Frequencies
above pi follow from conjugate symmetry, so regressions are solved only
for the lower half of the grid.
"""

from dataclasses import dataclass

import numpy as np

from .arrays import MultiSeries, QdftArray, enforce_conjugate_symmetry
from .errors import SolverError, ValidationError
from .qr import DEFAULT_MAX_ITER, DEFAULT_TOL, solve_qr_levels
from .sqr import SQR_MAX_ITER, assemble_sqr, penalty_plan, solve_sqr
from .splines import build_spline_basis
from ._pool import map_ordered


@dataclass(frozen=True)
class FourierGrid:
    """The n Fourier frequencies 2*pi*v/n with their index split."""

    n: int
    freqs: np.ndarray  # (n,)
    zero: int  # v = 0
    nyquist: int | None  # v = n/2 for even n
    general: np.ndarray  # v with omega in (0, pi)

    @property
    def positive(self):
        """Indices with omega in (0, pi]; regressions are solved here."""
        if self.nyquist is None:
            return self.general
        return np.concatenate([self.general, [self.nyquist]])


def fourier_grid(n):
    if n < 2:
        raise ValidationError("need n >= 2")
    freqs = 2.0 * np.pi * np.arange(n) / n
    nyquist = n // 2 if n % 2 == 0 else None
    general = np.arange(1, (n - 1) // 2 + 1)
    return FourierGrid(n=n, freqs=freqs, zero=0, nyquist=nyquist, general=general)


def trig_design(n, omega):
    """Regressors (1, cos(omega t), sin(omega t)) at t = 1..n."""
    t = np.arange(1, n + 1)
    return np.column_stack([np.ones(n), np.cos(omega * t), np.sin(omega * t)])


def _qdft_columns(args):
    """Worker: solve one series at a chunk of general frequencies."""
    y, levels, vs, n, tol, max_iter = args
    out = np.empty((len(vs), levels.size), dtype=complex)
    for i, v in enumerate(vs):
        X = trig_design(n, 2.0 * np.pi * v / n)
        try:
            res = solve_qr_levels(X, y, levels, tol=tol, max_iter=max_iter)
        except SolverError as exc:
            raise SolverError(
                f"quantile regression failed at frequency index {v}: {exc}",
                last_iterate=exc.last_iterate,
                gap=exc.gap,
            ) from exc
        out[i] = (n / 2.0) * (res.beta[:, 1] - 1j * res.beta[:, 2])
    return out


def qdft(series, levels, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, workers=None):
    """Quantile DFT of every series at every level.

    Parameters
    ----------
    series : MultiSeries
    levels : increasing quantile levels inside (0, 1)
    workers : int or None
        Processes used across frequencies; None or 1 solves in-process.

    Returns
    -------
    QdftArray with exact conjugate symmetry.
    """
    if not isinstance(series, MultiSeries):
        series = MultiSeries(np.asarray(series, dtype=float))
    levels = np.asarray(levels, dtype=float)
    grid = fourier_grid(series.n)
    m, n, L = series.m, series.n, levels.size
    z = np.zeros((m, L, n), dtype=complex)

    for j in range(m):
        y = series.values[j]
        # frequency zero: intercept-only fits are the sample quantiles
        res0 = solve_qr_levels(
            np.ones((n, 1)), y, levels, tol=tol, max_iter=max_iter
        )
        z[j, :, 0] = n * res0.beta[:, 0]
        if grid.nyquist is not None:
            t = np.arange(1, n + 1)
            Xn = np.column_stack([np.ones(n), np.cos(np.pi * t)])
            resn = solve_qr_levels(Xn, y, levels, tol=tol, max_iter=max_iter)
            z[j, :, grid.nyquist] = n * resn.beta[:, 1]
        tasks = [
            (y, levels, chunk, n, tol, max_iter)
            for chunk in _chunked(grid.general, workers)
        ]
        results = map_ordered(_qdft_columns, tasks, workers)
        cols = np.concatenate(results, axis=0) if results else np.empty((0, L))
        for i, v in enumerate(grid.general):
            z[j, :, v] = cols[i]

    return QdftArray(z=enforce_conjugate_symmetry(z), levels=levels)


def _sqdft_columns(args):
    """Worker: one joint spline fit per frequency for one series."""
    y, levels, vs, n, mu, weighted, max_knots, tol, max_iter = args
    from .qr import RegressionData

    basis = build_spline_basis(levels, max_knots=max_knots)
    out = np.empty((len(vs), levels.size), dtype=complex)
    for i, v in enumerate(vs):
        omega = 2.0 * np.pi * v / n
        if v == n // 2 and n % 2 == 0:
            t = np.arange(1, n + 1)
            X = np.column_stack([np.ones(n), np.cos(np.pi * t)])
        else:
            X = trig_design(n, omega)
        data = RegressionData(X, y)
        plan = penalty_plan(levels, n, data.p, basis, mu, weighted=weighted)
        try:
            sol = solve_sqr(assemble_sqr(data, basis, plan), tol=tol, max_iter=max_iter)
        except SolverError as exc:
            raise SolverError(
                f"spline regression failed at frequency index {v}: {exc}",
                last_iterate=exc.last_iterate,
                gap=exc.gap,
            ) from exc
        beta = sol.beta_at_levels
        if X.shape[1] == 2:
            out[i] = n * beta[:, 1]
        else:
            out[i] = (n / 2.0) * (beta[:, 1] - 1j * beta[:, 2])
    return out


def sqdft(series, levels, mu, weighted=False, max_knots=None,
          tol=DEFAULT_TOL, max_iter=SQR_MAX_ITER, workers=None):
    """Spline-smoothed quantile DFT.

    Same assembly as qdft, but all levels at one frequency are fit jointly
    with coefficients smooth in the level; the zero-frequency column uses
    raw per-level sample quantiles.
    """
    if not isinstance(series, MultiSeries):
        series = MultiSeries(np.asarray(series, dtype=float))
    levels = np.asarray(levels, dtype=float)
    if levels.size < 4:
        raise ValidationError("spline smoothing needs at least 4 levels")
    grid = fourier_grid(series.n)
    m, n, L = series.m, series.n, levels.size
    z = np.zeros((m, L, n), dtype=complex)

    for j in range(m):
        y = series.values[j]
        z[j, :, 0] = n * np.quantile(y, levels)
        tasks = [
            (y, levels, chunk, n, mu, weighted, max_knots, tol, max_iter)
            for chunk in _chunked(grid.positive, workers)
        ]
        results = map_ordered(_sqdft_columns, tasks, workers)
        cols = np.concatenate(results, axis=0)
        for i, v in enumerate(grid.positive):
            z[j, :, v] = cols[i]

    return QdftArray(z=enforce_conjugate_symmetry(z), levels=levels)


def _chunked(indices, workers, min_chunk=8):
    """Split frequency indices into contiguous chunks for the pool."""
    indices = np.asarray(indices)
    if indices.size == 0:
        return []
    nw = workers if workers and workers > 1 else 1
    chunks = max(1, min(indices.size // min_chunk, nw * 4)) if nw > 1 else 1
    return [c for c in np.array_split(indices, chunks) if c.size]
