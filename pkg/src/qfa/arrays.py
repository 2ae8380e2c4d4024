"""Array containers shared across the pipeline."""

from dataclasses import dataclass, replace

import numpy as np

from .errors import ValidationError

SPEC_KINDS = ("periodogram", "lw-estimate", "truth", "smoothed")


def _check_levels(levels):
    levels = np.asarray(levels, dtype=float)
    if levels.ndim != 1 or levels.size == 0:
        raise ValidationError("levels must be a non-empty 1-d array")
    if np.any(np.diff(levels) <= 0):
        raise ValidationError("levels must be strictly increasing")
    if levels[0] <= 0.0 or levels[-1] >= 1.0:
        raise ValidationError("levels must lie strictly inside (0,1)")
    return levels


@dataclass(frozen=True)
class MultiSeries:
    """m jointly observed series of common length n, one row per series."""

    values: np.ndarray  # (m, n)

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if v.ndim != 2:
            raise ValidationError("values must be at most 2-d")
        if v.shape[1] < 8:
            raise ValidationError("need at least 8 observations per series")
        if not np.isfinite(v).all():
            raise ValidationError("series must not contain missing values")
        object.__setattr__(self, "values", v)

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def n(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class QdftArray:
    """Quantile discrete Fourier transform: z[j, l, v] over series,
    levels, and all n Fourier frequencies."""

    z: np.ndarray  # (m, L, n) complex
    levels: np.ndarray  # (L,)

    def __post_init__(self):
        object.__setattr__(self, "levels", _check_levels(self.levels))
        z = np.asarray(self.z, dtype=complex)
        if z.ndim != 3 or z.shape[1] != self.levels.size:
            raise ValidationError("z must have shape (m, L, n)")
        object.__setattr__(self, "z", z)

    @property
    def m(self):
        return self.z.shape[0]

    @property
    def L(self):
        return self.z.shape[1]

    @property
    def n(self):
        return self.z.shape[2]


def enforce_conjugate_symmetry(z):
    """Overwrite the upper half of the frequency axis with conjugates of
    the lower half; the zero (and even-n Nyquist) bins become real."""
    z = np.array(z, dtype=complex)
    n = z.shape[-1]
    z[..., 0] = z[..., 0].real
    half = (n - 1) // 2
    if n % 2 == 0:
        z[..., n // 2] = z[..., n // 2].real
    if half >= 1:
        v = np.arange(1, half + 1)
        z[..., n - v] = np.conj(z[..., v])
    return z


def conjugate_symmetry_error(z):
    """Largest absolute deviation from conjugate symmetry."""
    n = z.shape[-1]
    err = float(np.abs(z[..., 0].imag).max()) if n else 0.0
    if n % 2 == 0:
        err = max(err, float(np.abs(z[..., n // 2].imag).max()))
    half = (n - 1) // 2
    if half >= 1:
        v = np.arange(1, half + 1)
        err = max(err, float(np.abs(z[..., n - v] - np.conj(z[..., v])).max()))
    return err


@dataclass(frozen=True)
class QuantileSeriesArray:
    """Quantile series x[j, l, t] and their means xbar[j, l]."""

    x: np.ndarray  # (m, L, n)
    xbar: np.ndarray  # (m, L)
    levels: np.ndarray

    @property
    def m(self):
        return self.x.shape[0]

    @property
    def n(self):
        return self.x.shape[2]


@dataclass(frozen=True)
class QacfArray:
    """Quantile auto/cross-covariances gamma[j, j', l, tau], tau = 0..n-1.

    Negative lags follow from gamma[j, j', l, -tau] = gamma[j', j, l, tau].
    """

    gamma: np.ndarray  # (m, m, L, n)
    levels: np.ndarray

    @property
    def m(self):
        return self.gamma.shape[0]

    @property
    def n(self):
        return self.gamma.shape[3]


@dataclass(frozen=True)
class QSpecMatrix:
    """Spectral matrix field s[l, v, j, j'] on a frequency grid."""

    s: np.ndarray  # (L, V, m, m) complex
    freqs: np.ndarray  # (V,)
    levels: np.ndarray
    kind: str = "periodogram"

    def __post_init__(self):
        if self.kind not in SPEC_KINDS:
            raise ValidationError(f"kind must be one of {SPEC_KINDS}")
        s = np.asarray(self.s, dtype=complex)
        freqs = np.asarray(self.freqs, dtype=float)
        levels = _check_levels(self.levels)
        if s.ndim != 4 or s.shape[2] != s.shape[3]:
            raise ValidationError("s must have shape (L, V, m, m)")
        if s.shape[0] != levels.size or s.shape[1] != freqs.size:
            raise ValidationError("s does not match the level/frequency grids")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "levels", levels)

    @property
    def m(self):
        return self.s.shape[2]

    @property
    def V(self):
        return self.freqs.size

    def with_kind(self, kind):
        return replace(self, kind=kind)

    def restrict(self, freq_indices):
        """Sub-grid view on a subset of frequency indices."""
        idx = np.asarray(freq_indices, dtype=int)
        return QSpecMatrix(
            s=self.s[:, idx], freqs=self.freqs[idx], levels=self.levels, kind=self.kind
        )


def hermitian_error(spec):
    """Largest deviation of any slice from Hermitian symmetry."""
    return float(np.abs(spec.s - np.conj(np.swapaxes(spec.s, 2, 3))).max())


def half_grid_indices(n, freqs):
    """Positions matching the interior half grid 2*pi*v/n, v=1..floor((n-1)/2)."""
    target = 2.0 * np.pi * np.arange(1, (n - 1) // 2 + 1) / n
    idx = np.searchsorted(freqs, target)
    idx = np.clip(idx, 0, freqs.size - 1)
    ok = np.abs(freqs[idx] - target) < 1e-9
    if not np.all(ok):
        raise ValidationError("frequency grid does not contain the half grid")
    return idx
