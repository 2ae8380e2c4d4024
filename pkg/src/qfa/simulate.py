"""Simulation testbed: nonlinear AR mixtures, ensemble ground truth, and
Monte Carlo accuracy experiments.

Randomness comes from numpy's PCG64 generator; independent streams are
derived with SeedSequence spawn keys (master seed, domain, run, component),
so any subset of runs can be reproduced in isolation and results do not
depend on how runs are scheduled.  Gaussian draws use the generator's
standard ziggurat transform.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .arrays import MultiSeries, QSpecMatrix, half_grid_indices
from .errors import NumericError, ValidationError
from .qdft import qdft, sqdft
from .qseries import qacf, qper, qser
from .qsmooth import SmootherConfig, lwqs, psd_repair, qslw
from .spectral import LagWindow, kld, lw_estimate
from ._pool import map_ordered

# SeedSequence spawn-key domains
DOMAIN_TRUTH = 0
DOMAIN_EVAL = 1

# fixed reduction chunk so sums are grouped identically for any worker count
REDUCE_CHUNK = 32


@dataclass(frozen=True)
class SimConfig:
    """Two-series testbed: a nonlinear mixture of a low-pass, a high-pass,
    and a band-pass AR component, plus a delayed copy of the band-pass."""

    n: int = 512
    a11: float = 0.8
    a21: float = -0.7
    r: float = 0.9
    f0: float = 0.2
    seed: int = 20221109
    burn_in: int = 1000
    delay: int = 10

    @property
    def a31(self):
        return 2.0 * self.r * np.cos(2.0 * np.pi * self.f0)

    @property
    def a32(self):
        return -self.r**2


def _rng(seed, *key):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))


def _yule_walker_sigma(coeffs):
    """Innovation s.d. giving a unit-variance stationary AR process."""
    a = np.asarray(coeffs, dtype=float)
    p = a.size
    if p == 0:
        return 1.0
    poly = np.concatenate([[1.0], -a])
    roots = np.roots(poly)
    if np.any(np.abs(roots) >= 1.0 - 1e-10):
        raise ValidationError("AR coefficients are not stationary")
    # solve for autocorrelations rho_1..rho_p with rho_0 = 1
    A = np.eye(p)
    rhs = a.copy()
    for k in range(1, p + 1):
        for i in range(1, p + 1):
            mlag = abs(k - i)
            if mlag >= 1:
                A[k - 1, mlag - 1] -= a[i - 1]
    rho = np.linalg.solve(A, rhs)
    var = 1.0 - float(a @ rho)
    if var <= 0:
        raise NumericError("Yule-Walker variance came out non-positive")
    return float(np.sqrt(var))


def gen_ar(coeffs, n_out, rng, burn_in=1000):
    """Zero-mean unit-variance Gaussian AR sample, transient discarded."""
    coeffs = np.asarray(coeffs, dtype=float)
    sigma = _yule_walker_sigma(coeffs)
    eps = sigma * rng.standard_normal(burn_in + n_out)
    if coeffs.size == 0:
        return eps[burn_in:]
    series = lfilter([1.0], np.concatenate([[1.0], -coeffs]), eps)
    return series[burn_in:]


def psi(u, which):
    """Piecewise-linear mixture weights of the testbed."""
    u = np.asarray(u, dtype=float)
    if which == 1:
        mid = 0.9 - (7.0 / 16.0) * (u + 0.8)
        return np.where(u < -0.8, 0.9, np.where(u > 0.8, 0.2, mid))
    if which == 2:
        mid = 0.5 + (5.0 / 8.0) * (u + 0.4)
        return np.where(u < -0.4, 0.5, np.where(u > 0.4, 1.0, mid))
    raise ValidationError("which must be 1 or 2")


def simulate_pair(cfg, psi1=None, psi2=None):
    """One draw of the two-series testbed.

    psi1/psi2 override the mixture weight functions (test hook); the
    second series is the band-pass component delayed by cfg.delay.
    """
    if psi1 is None:
        psi1 = lambda u: psi(u, 1)
    if psi2 is None:
        psi2 = lambda u: psi(u, 2)
    n, d = cfg.n, cfg.delay
    u1 = gen_ar([cfg.a11], n, _rng(cfg.seed, 1), burn_in=cfg.burn_in)
    u2 = gen_ar([cfg.a21], n, _rng(cfg.seed, 2), burn_in=cfg.burn_in)
    w3 = gen_ar([cfg.a31, cfg.a32], n + d, _rng(cfg.seed, 3), burn_in=cfg.burn_in)
    u3 = w3[d:]
    y2 = w3[:n]
    w1 = psi1(u1)
    u4 = w1 * u1 + (1.0 - w1) * u2
    w2 = psi2(u4)
    y1 = w2 * u4 + (1.0 - w2) * u3
    return MultiSeries(np.vstack([y1, y2]))


def run_config(cfg, domain, run_index):
    """Config for one Monte Carlo run: same design, derived seed."""
    seq = np.random.SeedSequence(entropy=cfg.seed, spawn_key=(domain, run_index))
    return replace(cfg, seed=int(seq.generate_state(1, np.uint64)[0]))


def _truth_chunk(args):
    cfg, levels, runs_chunk = args
    total = None
    for i in runs_chunk:
        series = simulate_pair(run_config(cfg, DOMAIN_TRUTH, int(i)))
        per = qper(qdft(series, levels))
        total = per.s.copy() if total is None else total + per.s
    return total


def ensemble_truth(cfg, levels, runs, workers=None):
    """Ground-truth spectra: ensemble mean of quantile periodograms.

    Runs are independent; sums are accumulated in fixed-size chunks in run
    order, so the result is bit-identical for any worker count.
    """
    if runs < 100:
        raise ValidationError("need at least 100 runs for a usable ensemble")
    levels = np.asarray(levels, dtype=float)
    chunks = [
        (cfg, levels, np.arange(lo, min(lo + REDUCE_CHUNK, runs)))
        for lo in range(0, runs, REDUCE_CHUNK)
    ]
    partials = map_ordered(_truth_chunk, chunks, workers)
    total = partials[0]
    for part in partials[1:]:
        total = total + part
    s = total / runs
    freqs = 2.0 * np.pi * np.arange(cfg.n) / cfg.n
    spec = QSpecMatrix(s=s, freqs=freqs, levels=levels, kind="truth")
    evals = np.linalg.eigvalsh(spec.s)
    if np.any(evals[..., 0] <= 0.0):
        l, v = np.argwhere(evals[..., 0] <= 0.0)[0]
        raise NumericError(
            f"averaged slice at frequency index {v}, level index {l} is "
            f"singular; increase the number of runs"
        )
    return spec


@dataclass(frozen=True)
class EstimatorSpec:
    """One spectral estimator for the Monte Carlo comparison.

    method: "lw" (no quantile smoothing), "lwqs", "qslw", "sqrlw", or
    "oracle" (returns the truth itself, for harness checks).
    """

    method: str = "lw"
    window: LagWindow = field(default_factory=LagWindow)
    smoother: SmootherConfig | None = None
    mu: float | None = None
    weighted: bool = False
    max_knots: int | None = None

    def __post_init__(self):
        if self.method not in ("lw", "lwqs", "qslw", "sqrlw", "oracle"):
            raise ValidationError(f"unknown estimator method {self.method!r}")
        if self.method in ("lwqs", "qslw") and self.smoother is None:
            raise ValidationError(f"{self.method} needs a smoother config")
        if self.method == "sqrlw" and self.mu is None:
            raise ValidationError("sqrlw needs the smoothing exponent mu")


def _estimate_with_cache(series, levels, spec, cache):
    """One estimator on one dataset, reusing shared transforms/covariances.

    Estimators differing only in window or smoother settings share the
    underlying transform, which dominates the cost of a run.
    """
    if spec.method == "sqrlw":
        tkey = ("sqdft", spec.mu, spec.weighted, spec.max_knots)
        if tkey not in cache:
            cache[tkey] = sqdft(series, levels, mu=spec.mu, weighted=spec.weighted,
                                max_knots=spec.max_knots)
    else:
        tkey = ("qdft",)
        if tkey not in cache:
            cache[tkey] = qdft(series, levels)
    transform = cache[tkey]
    if spec.method == "qslw":
        acf = qacf(qser(qslw(transform, spec.smoother)))
    else:
        akey = tkey + ("acf",)
        if akey not in cache:
            cache[akey] = qacf(qser(transform))
        acf = cache[akey]
    est = lw_estimate(acf, spec.window)
    if spec.method == "lwqs":
        return lwqs(est, spec.smoother)
    return psd_repair(est)


def estimate_spectrum(series, levels, spec):
    """Run one estimator on one dataset; returns a half-grid QSpecMatrix."""
    return _estimate_with_cache(series, levels, spec, {})


def _mc_chunk(args):
    cfg, levels, estimators, truth_s, truth_freqs, runs_chunk = args
    truth = QSpecMatrix(s=truth_s, freqs=truth_freqs, levels=levels, kind="truth")
    out = np.empty((len(runs_chunk), len(estimators)))
    for row, i in enumerate(runs_chunk):
        series = simulate_pair(run_config(cfg, DOMAIN_EVAL, int(i)))
        cache = {}
        for col, spec in enumerate(estimators):
            if spec.method == "oracle":
                out[row, col] = 0.0
                continue
            est = _estimate_with_cache(series, levels, spec, cache)
            out[row, col] = kld(est, truth).value
    return out


@dataclass(frozen=True)
class MonteCarloResult:
    mean: np.ndarray  # (E,)
    sd: np.ndarray  # (E,)
    values: np.ndarray  # (runs, E)


def monte_carlo_kld(cfg, estimators, truth, runs, workers=None):
    """Divergence of one or more estimators over independent runs.

    estimators may be a single EstimatorSpec or a sequence; sharing runs
    across estimators keeps the comparison paired.  Per-run seeds derive
    from (cfg.seed, evaluation domain, run index).
    """
    single = isinstance(estimators, EstimatorSpec)
    specs = [estimators] if single else list(estimators)
    if runs < 1:
        raise ValidationError("need at least one run")
    levels = truth.levels
    idx = half_grid_indices(cfg.n, truth.freqs)
    truth_half = truth.restrict(idx)
    chunks = [
        (cfg, levels, specs, truth_half.s, truth_half.freqs,
         np.arange(lo, min(lo + REDUCE_CHUNK, runs)))
        for lo in range(0, runs, REDUCE_CHUNK)
    ]
    parts = map_ordered(_mc_chunk, chunks, workers)
    values = np.concatenate(parts, axis=0)
    mean = values.mean(axis=0)
    sd = values.std(axis=0, ddof=1) if runs > 1 else np.zeros(len(specs))
    if single:
        return MonteCarloResult(mean=mean[0], sd=sd[0], values=values[:, 0])
    return MonteCarloResult(mean=mean, sd=sd, values=values)
