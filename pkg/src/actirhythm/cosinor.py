"""Two-stage circadian curve fitting.

Stage 1 projects the (optionally log1p-transformed) activity onto a 24 h
cosine by linear least squares. Stage 2 refines the sigmoidally transformed
cosine by Levenberg-Marquardt over an unconstrained reparameterization:
amplitude = exp(w), alpha = tanh(u), beta = exp(v); min and phase are free
and phase is reported mod 24.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import curve
from .curve import antilogistic  # re-exported; stable sigmoid
from .errors import InsufficientSpan
from .nls import NlsOptions, ResidualProblem, levenberg_marquardt, linear_least_squares
from .preprocess import ActivitySeries

__all__ = [
    "FitConfig", "LinearCosinorFit", "SigmoidalCosinorFit", "antilogistic",
    "model_value", "fit_linear_cosinor", "initial_sigmoidal_params",
    "fit_sigmoidal_cosinor", "export_fitted_curve",
]

_OMEGA = 2.0 * np.pi / 24.0
# |u| or |v| beyond this means tanh/exp is pinned at its numerical limit
_BOUND_LIMIT = 20.0

_TRANSFORMS = {"raw": lambda v: np.asarray(v, dtype=float), "log1p": np.log1p}

# Tighter than the generic NlsOptions defaults: parameter recovery on
# noiseless series should be limited by float precision, not the stop rule.
_FIT_OPTIONS = NlsOptions(max_iterations=400, gradient_tolerance=1e-12,
                          step_tolerance=1e-14, initial_damping=1e-3)


@dataclass(frozen=True)
class FitConfig:
    transform: str = "log1p"
    epoch_hours: float = 1.0 / 60.0
    multistart: int = 1
    options: NlsOptions = _FIT_OPTIONS

    def __post_init__(self):
        if self.transform not in _TRANSFORMS:
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.multistart < 1:
            raise ValueError("multistart must be >= 1")


@dataclass(frozen=True)
class LinearCosinorFit:
    mesor: float
    amplitude: float
    acrophase: float  # hours in [0, 24)


@dataclass(frozen=True)
class SigmoidalCosinorFit:
    min: float
    amplitude: float
    alpha: float
    beta: float
    phase: float       # hours in [0, 24)
    mesor: float       # min + amplitude / 2
    rss: float
    converged: bool
    n_points: int
    degenerate: bool = False
    at_bound: bool = False
    transform: str = "log1p"


def model_value(t, fit: SigmoidalCosinorFit):
    """Fitted curve value at time t (hours); vectorized."""
    return curve.evaluate(t, fit.min, fit.amplitude, fit.alpha, fit.beta, fit.phase)


def _fit_data(series: ActivitySeries, config: FitConfig) -> tuple[np.ndarray, np.ndarray]:
    mask = series.valid_minutes_mask()
    t = series.time_hours()[mask]
    y = _TRANSFORMS[config.transform](series.values[mask])
    return t, y


def fit_linear_cosinor(series: ActivitySeries,
                       config: FitConfig = FitConfig()) -> LinearCosinorFit:
    """Least-squares projection onto [1, cos, sin] of 24 h period."""
    t, y = _fit_data(series, config)
    if t.size < 3 or (t.max() - t.min()) <= 12.0:
        raise InsufficientSpan(
            "need at least 3 valid minutes spanning more than 12 hours")
    design = np.column_stack([np.ones(t.size), np.cos(_OMEGA * t), np.sin(_OMEGA * t)])
    b0, bc, bs = linear_least_squares(design, y)
    amplitude = math.hypot(bc, bs)
    if amplitude <= 1e-12 * max(1.0, abs(b0)):
        acrophase = 0.0
    else:
        acrophase = (math.atan2(bs, bc) / _OMEGA) % 24.0
    return LinearCosinorFit(mesor=float(b0), amplitude=float(amplitude),
                            acrophase=float(acrophase))


def initial_sigmoidal_params(linear: LinearCosinorFit,
                             transform: str = "log1p") -> np.ndarray:
    """Stage-2 starting point (min, amplitude, phase, alpha, beta) derived
    from the stage-1 cosine."""
    min0 = linear.mesor - linear.amplitude
    if transform == "raw" and min0 < 0:
        min0 = 0.0
    if linear.amplitude == 0.0:
        return np.array([linear.mesor, 0.0, 0.0, 0.0, 2.0])
    return np.array([min0, 2.0 * linear.amplitude, linear.acrophase, 0.0, 2.0])


def _degenerate_fit(y: np.ndarray, config: FitConfig, n_points: int) -> SigmoidalCosinorFit:
    level = float(y[0])
    return SigmoidalCosinorFit(min=level, amplitude=0.0, alpha=0.0, beta=2.0,
                               phase=0.0, mesor=level, rss=0.0, converged=False,
                               n_points=n_points, degenerate=True,
                               transform=config.transform)


def fit_sigmoidal_cosinor(series: ActivitySeries,
                          config: FitConfig = FitConfig()) -> SigmoidalCosinorFit:
    """Two-stage fit of the sigmoidally transformed cosine.

    A fit whose amplitude collapses below 1e-9 of the data range is returned
    with degenerate=True and converged=False rather than raised.
    """
    t, y = _fit_data(series, config)
    data_range = float(y.max() - y.min()) if y.size else 0.0
    if y.size and data_range == 0.0:
        return _degenerate_fit(y, config, int(y.size))

    linear = fit_linear_cosinor(series, config)
    seed = initial_sigmoidal_params(linear, config.transform)
    amp0 = max(seed[1], 1e-3 * data_range)  # log reparameterization needs > 0

    def residual(p: np.ndarray) -> np.ndarray:
        min_, w, phase, u, v = p
        return y - curve.evaluate(t, min_, np.exp(w), np.tanh(u), np.exp(v), phase)

    problem = ResidualProblem(residual, 5, int(y.size))
    best = None
    for k in range(config.multistart):
        phase0 = seed[2] + 24.0 * k / config.multistart
        x0 = np.array([seed[0], np.log(amp0), phase0,
                       np.arctanh(seed[3]), np.log(seed[4])])
        result = levenberg_marquardt(problem, x0, config.options)
        if best is None or result.rss < best.rss:
            best = result

    min_, w, phase, u, v = best.params
    amplitude = float(np.exp(w))
    alpha = float(np.clip(np.tanh(u), -(1.0 - 1e-12), 1.0 - 1e-12))
    beta = float(np.exp(v))
    phase = float(phase % 24.0)
    degenerate = amplitude < 1e-9 * data_range
    at_bound = abs(u) > _BOUND_LIMIT or abs(v) > _BOUND_LIMIT
    return SigmoidalCosinorFit(
        min=float(min_), amplitude=amplitude, alpha=alpha, beta=beta,
        phase=phase, mesor=float(min_) + amplitude / 2.0, rss=float(best.rss),
        converged=bool(best.converged and not degenerate),
        n_points=int(y.size), degenerate=degenerate, at_bound=at_bound,
        transform=config.transform)


def export_fitted_curve(fit: SigmoidalCosinorFit,
                        resolution: float = 1.0) -> np.ndarray:
    """Sample the fitted curve over one 24 h cycle at ``resolution`` minutes;
    returns an (n, 2) array of (hours, value)."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    minutes = np.arange(0.0, 1440.0, resolution)
    t = minutes / 60.0
    return np.column_stack([t, model_value(t, fit)])
