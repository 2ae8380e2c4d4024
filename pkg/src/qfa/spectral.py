"""Lag-window spectral estimation and the Kullback-Leibler accuracy metric."""

from dataclasses import dataclass

import numpy as np

from .arrays import QacfArray, QSpecMatrix
from .errors import NumericError, ValidationError

WINDOW_KINDS = ("tukey-hanning", "bartlett", "parzen")


@dataclass(frozen=True)
class LagWindow:
    """Even, nonnegative lag window with bandwidth M and unit value at 0."""

    kind: str = "tukey-hanning"
    M: float = 30.0

    def __post_init__(self):
        if self.kind not in WINDOW_KINDS:
            raise ValidationError(f"window kind must be one of {WINDOW_KINDS}")
        if self.M <= 0:
            raise ValidationError("bandwidth M must be positive")


def window_weight(w, tau):
    """Window value at integer lag(s) tau."""
    tau = np.abs(np.asarray(tau, dtype=float))
    M = float(w.M)
    inside = tau <= M
    if w.kind == "tukey-hanning":
        vals = 0.5 * (1.0 + np.cos(np.pi * tau / M))
    elif w.kind == "bartlett":
        vals = 1.0 - tau / M
    else:  # parzen
        r = tau / M
        vals = np.where(r <= 0.5, 1.0 - 6.0 * r**2 + 6.0 * r**3, 2.0 * (1.0 - r) ** 3)
    return np.where(inside, vals, 0.0)


def lw_estimate(acf, window, freqs=None):
    """Lag-window estimate of the quantile spectral matrix.

    sum over |tau| < n of W(tau) Gamma(tau) exp(-i tau omega), with
    Gamma(-tau) = Gamma(tau)'.  On the default grid (interior half grid
    omega_v = 2 pi v / n, v = 1..floor((n-1)/2)) the two-sided sum is
    evaluated by a zero-padded length-2n FFT; custom grids fall back to a
    direct evaluation.  Slices are Hermitian by construction.
    """
    if not isinstance(acf, QacfArray):
        raise ValidationError("expected a QacfArray")
    n = acf.n
    if window.M >= n:
        raise ValidationError("bandwidth must satisfy M < n")
    m, L = acf.m, acf.levels.size
    taus = np.arange(n)
    wt = window_weight(window, taus)  # (n,)
    g = acf.gamma * wt[None, None, None, :]  # (m, m, L, n)

    if freqs is None:
        # circular embedding of the two-sided sequence in length 2n:
        # index tau for positive lags, 2n - tau for negative lags
        buf = np.zeros((m, m, L, 2 * n), dtype=float)
        buf[..., :n] = g
        gT = np.swapaxes(g, 0, 1)
        buf[..., n + 1 :] = gT[..., 1:][..., ::-1]
        spec = np.fft.fft(buf, axis=-1)
        half = np.arange(1, (n - 1) // 2 + 1)
        s = spec[..., 2 * half]  # (m, m, L, V)
        out_freqs = 2.0 * np.pi * half / n
    else:
        out_freqs = np.asarray(freqs, dtype=float)
        phase = np.exp(-1j * np.outer(taus, out_freqs))  # (n, V)
        pos = g @ phase  # (m, m, L, V)
        neg = np.swapaxes(g, 0, 1)[..., 1:] @ np.conj(phase[1:])
        s = pos + neg
    s = np.moveaxis(s, (2, 3), (0, 1))  # (L, V, m, m)
    s = 0.5 * (s + np.conj(np.swapaxes(s, 2, 3)))
    return QSpecMatrix(s=s, freqs=out_freqs, levels=acf.levels, kind="lw-estimate")


@dataclass(frozen=True)
class KldResult:
    value: float
    grid: tuple  # (V, L)


def kld(est, truth):
    """Whittle-style Kullback-Leibler divergence averaged over the grid.

    Per cell: trace(est * truth^-1) - log det(est)/det(truth) - m.  Both
    fields must live on identical grids and every slice must be
    nonsingular (repair rank-deficient estimates first).
    """
    if not isinstance(est, QSpecMatrix) or not isinstance(truth, QSpecMatrix):
        raise ValidationError("expected QSpecMatrix inputs")
    if est.s.shape != truth.s.shape:
        raise ValidationError("estimate and truth grids have different shapes")
    if not np.allclose(est.freqs, truth.freqs, atol=1e-12):
        raise ValidationError("frequency grids differ")
    if not np.allclose(est.levels, truth.levels, atol=1e-12):
        raise ValidationError("level grids differ")
    L, V, m, _ = est.s.shape

    sign_t, logdet_t = np.linalg.slogdet(truth.s)
    sign_e, logdet_e = np.linalg.slogdet(est.s)
    bad_t = (np.real(sign_t) <= 0.5) | ~np.isfinite(logdet_t)
    bad_e = (np.real(sign_e) <= 0.5) | ~np.isfinite(logdet_e)
    for bad, name in ((bad_t, "truth"), (bad_e, "estimate")):
        if np.any(bad):
            l, v = np.argwhere(bad)[0]
            raise NumericError(
                f"singular or non-positive {name} slice at frequency index "
                f"{v}, level index {l}"
            )
    try:
        ratio = np.linalg.solve(truth.s, est.s)
    except np.linalg.LinAlgError as exc:
        raise NumericError("singular truth slice") from exc
    tr = np.einsum("lvii->lv", ratio).real
    cell = tr - (logdet_e - logdet_t) - m
    return KldResult(value=float(cell.mean()), grid=(V, L))
