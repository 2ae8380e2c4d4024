"""Quantile series, quantile autocovariances, and quantile periodograms."""

import numpy as np

from .arrays import (
    QacfArray,
    QdftArray,
    QSpecMatrix,
    QuantileSeriesArray,
    conjugate_symmetry_error,
)
from .errors import ValidationError

# Residual imaginary mass allowed after the inverse transform of a
# conjugate-symmetric array; anything larger means broken symmetry.
IMAG_TOL = 1e-9


def qser(qdft_arr):
    """Quantile series: inverse DFT of each (series, level) row.

    The transform is indexed t = 1..n, so the inverse-FFT output (indexed
    from t = 0) is rotated by one position.  Output is real under exact
    conjugate symmetry; a violation above tolerance is rejected.
    """
    if not isinstance(qdft_arr, QdftArray):
        raise ValidationError("expected a QdftArray")
    z = qdft_arr.z
    n = qdft_arr.n
    scale = max(1.0, float(np.abs(z).max()) / n)
    if conjugate_symmetry_error(z) > IMAG_TOL * n * scale:
        raise ValidationError("QDFT array is not conjugate symmetric")
    raw = np.fft.ifft(z, axis=-1)
    x = np.roll(raw, -1, axis=-1)
    if float(np.abs(x.imag).max()) > IMAG_TOL * scale:
        raise ValidationError("inverse transform has non-negligible imaginary part")
    xbar = z[:, :, 0].real / n
    return QuantileSeriesArray(x=x.real, xbar=xbar, levels=qdft_arr.levels)


def qacf(qs):
    """Biased (divide-by-n) auto/cross-covariances of the quantile series.

    Computed with length-2n transforms of the centered series, so no
    circular wrap enters any lag up to n-1.
    """
    if not isinstance(qs, QuantileSeriesArray):
        raise ValidationError("expected a QuantileSeriesArray")
    x, xbar = qs.x, qs.xbar
    m, L, n = x.shape
    a = x - xbar[:, :, None]
    F = np.fft.rfft(a, 2 * n, axis=-1)  # (m, L, n+1)
    prod = F[:, None, :, :] * np.conj(F[None, :, :, :])  # (m, m, L, n+1)
    gamma = np.fft.irfft(prod, 2 * n, axis=-1)[..., :n] / n
    return QacfArray(gamma=gamma, levels=qs.levels)


def qper(qdft_arr):
    """Quantile periodogram and cross-periodogram: rank-one outer products
    of the QDFT slices scaled by 1/n, on the full frequency grid."""
    if not isinstance(qdft_arr, QdftArray):
        raise ValidationError("expected a QdftArray")
    z = qdft_arr.z
    n = qdft_arr.n
    s = np.einsum("jlv,klv->lvjk", z, np.conj(z)) / n
    freqs = 2.0 * np.pi * np.arange(n) / n
    return QSpecMatrix(s=s, freqs=freqs, levels=qdft_arr.levels, kind="periodogram")
