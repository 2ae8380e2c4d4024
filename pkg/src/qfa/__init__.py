"""Quantile-frequency analysis.

Estimation of quantile spectra and cross-spectra: trigonometric quantile
regression transforms, quantile series and autocovariances, lag-window
spectral estimates, quantile smoothing (including spline quantile
regression), and a Monte Carlo harness for accuracy experiments.
"""

__version__ = "0.1.0"

from .arrays import (
    MultiSeries,
    QacfArray,
    QdftArray,
    QSpecMatrix,
    QuantileSeriesArray,
)
from .errors import NumericError, QfaError, SolverError, ValidationError
from .qdft import fourier_grid, qdft, sqdft
from .qr import QrSolution, RegressionData, check_loss, solve_qr, solve_qr_oracle
from .qseries import qacf, qper, qser
from .qsmooth import SmootherConfig, lwqs, psd_repair, qslw, smooth_series
from .simulate import (
    EstimatorSpec,
    SimConfig,
    ensemble_truth,
    gen_ar,
    monte_carlo_kld,
    psi,
    simulate_pair,
)
from .spectral import KldResult, LagWindow, kld, lw_estimate, window_weight
from .splines import SplineBasis, build_spline_basis
from .sqr import (
    PenaltyPlan,
    SqrProblem,
    SqrSolution,
    assemble_sqr,
    penalty_plan,
    solve_sqr,
    sqr_objective,
)
