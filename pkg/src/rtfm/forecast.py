"""Rolling-window tail-robust forecasting for vector panels.

At forecast origin ``t`` the window holds the ``T`` most recent observations
(up to and including ``t``). Each variable is optionally standardised within
the window, truncated moments are formed, and the ``h``-step-ahead cross
moment is projected through the estimated factor space:

``xhat_{t+h} = lagged_moment(tau, h).T @ E @ M^{-1} @ f_t``

with ``E, M`` the leading eigenpairs of the contemporaneous truncated moment
and ``f_t = E.T @ trunc(x_t, kappa)``. Predictions are mapped back to
original units. No future observation is ever read when forecasting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericError
from .linalg import sym_eig
from .moments import truncate
from .tuning import CvConfig, cv_tau


@dataclass
class ForecastConfig:
    window: int
    rank: int
    horizons: int = 24
    tau: float | str = "cv"         # "cv", a positive level, or numpy.inf
    kappa: float | str = "tau"      # "tau" ties it to the selected tau
    standardize: str = "mean_sd"    # "mean_sd", "median_mad" or "none"
    cv_per_window: bool = False     # re-tune tau in every window
    cv: CvConfig = field(default_factory=lambda: CvConfig(grid_size=20, folds=3))

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be >= 1")
        if self.horizons < 1:
            raise ValueError("horizons must be >= 1")
        if self.window < self.horizons + 2:
            raise ValueError("window must be at least horizons + 2")
        if self.standardize not in ("mean_sd", "median_mad", "none"):
            raise ValueError(f"unknown standardisation {self.standardize!r}")
        if not isinstance(self.tau, str) and not float(self.tau) > 0:
            raise ValueError("tau must be positive")


@dataclass
class RollingResult:
    origins: np.ndarray       # 1-based forecast origins t
    predictions: np.ndarray   # (len(origins), horizons, p)
    errors: np.ndarray        # (len(origins), p) mean absolute error over horizons
    mean_by_var: np.ndarray   # (p,)
    taus: np.ndarray          # truncation level used per origin


def lagged_second_moment(window: np.ndarray, tau: float, h: int) -> np.ndarray:
    """Truncated lag-``h`` cross moment ``T^{-1} sum_u x_u x_{u+h}.T`` over a
    window of ``T`` observations; ``h = 0`` gives the symmetric PSD
    contemporaneous moment, ``h > 0`` is generally asymmetric."""
    window = np.asarray(window, dtype=float)
    if window.ndim != 2:
        raise ValueError("window must be a (T, p) panel")
    t_len = window.shape[0]
    if not 0 <= h <= t_len - 1:
        raise ValueError(f"lag {h} out of range for window of length {t_len}")
    x = truncate(window, tau)
    if h == 0:
        g = x.T @ x / t_len
        return (g + g.T) / 2.0
    return x[: t_len - h].T @ x[h:] / t_len


def _standardizer(window: np.ndarray, kind: str) -> tuple[np.ndarray, np.ndarray]:
    if kind == "none":
        p = window.shape[1]
        return np.zeros(p), np.ones(p)
    if kind == "mean_sd":
        center = window.mean(axis=0)
        scale = window.std(axis=0)
    else:  # median_mad
        center = np.median(window, axis=0)
        scale = np.median(np.abs(window - center), axis=0)
    if np.any(scale <= 0.0):
        bad = int(np.argmin(scale))
        raise NumericError(f"variable {bad} has zero scale inside the window")
    return center, scale


def _window_model(window: np.ndarray, tau: float, kappa: float, rank: int):
    gamma0 = lagged_second_moment(window, tau, 0)
    pairs = sym_eig(gamma0, rank)
    if pairs.values[-1] <= 1e-12:
        raise NumericError(
            f"factor moment is singular (smallest kept eigenvalue {pairs.values[-1]:.3e})"
        )
    f_now = pairs.vectors.T @ truncate(window[-1], kappa)
    return pairs, f_now


def _predict_window(window: np.ndarray, config: ForecastConfig, tau: float) -> np.ndarray:
    """All-variable predictions for horizons 1..h_max from one window, in
    standardised units of that window."""
    kappa = tau if config.kappa == "tau" else float(config.kappa)
    pairs, f_now = _window_model(window, tau, kappa, config.rank)
    weights = pairs.vectors @ (f_now / pairs.values)   # E M^{-1} f
    preds = np.empty((config.horizons, window.shape[1]))
    for h in range(1, config.horizons + 1):
        preds[h - 1] = lagged_second_moment(window, tau, h).T @ weights
    return preds


def _resolve_tau(window: np.ndarray, config: ForecastConfig) -> float:
    if config.tau == "cv":
        return cv_tau(window, (config.rank,), config.cv).tau
    return float(config.tau)


def forecast_one(
    window: np.ndarray,
    var_index: int,
    horizon: int,
    config: ForecastConfig,
    tau: float | None = None,
) -> float:
    """Forecast one variable ``horizon`` steps past the end of ``window``.

    ``horizon = 0`` is allowed and reproduces the window's last observation
    when the model is saturated (full rank, no truncation).
    """
    window = np.asarray(window, dtype=float)
    if not 0 <= horizon <= config.horizons:
        raise ValueError(f"horizon {horizon} outside 0..{config.horizons}")
    center, scale = _standardizer(window, config.standardize)
    std_window = (window - center) / scale
    level = _resolve_tau(std_window, config) if tau is None else float(tau)
    kappa = level if config.kappa == "tau" else float(config.kappa)
    pairs, f_now = _window_model(std_window, level, kappa, config.rank)
    weights = pairs.vectors @ (f_now / pairs.values)
    pred = lagged_second_moment(std_window, level, horizon).T @ weights
    return float(pred[var_index] * scale[var_index] + center[var_index])


def rolling_errors(
    series: np.ndarray, config: ForecastConfig, predictor=None
) -> RollingResult:
    """Roll the forecaster through a panel and score it.

    Forecast origins are ``t = T + 1, ..., n - h_max`` (1-based); the error of
    variable ``i`` at origin ``t`` is the mean absolute deviation of the
    ``h = 1..h_max`` predictions from the realised values. The truncation
    level is tuned once on the first window unless ``cv_per_window`` is set.

    ``predictor(window, origin_index) -> (horizons, p)`` overrides the
    model-based forecaster (testing hook); it must use only the window.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise ValueError("series must be a (n, p) panel")
    n, p = series.shape
    t_len, h_max = config.window, config.horizons
    if n < t_len + h_max + 1:
        raise ValueError(
            f"need at least window + horizons + 1 = {t_len + h_max + 1} observations, got {n}"
        )
    origins = np.arange(t_len + 1, n - h_max + 1)   # 1-based
    m = origins.size
    predictions = np.empty((m, h_max, p))
    errors = np.empty((m, p))
    taus = np.empty(m)
    shared_tau: float | None = None
    for j, t in enumerate(origins):
        window = series[t - t_len : t]              # observations t-T+1..t, 1-based
        if predictor is not None:
            preds = np.asarray(predictor(window, int(t)))
            taus[j] = math.nan
        else:
            center, scale = _standardizer(window, config.standardize)
            std_window = (window - center) / scale
            if config.tau == "cv" and not config.cv_per_window:
                if shared_tau is None:
                    shared_tau = cv_tau(std_window, (config.rank,), config.cv).tau
                level = shared_tau
            else:
                level = _resolve_tau(std_window, config)
            taus[j] = level
            preds = _predict_window(std_window, config, level) * scale + center
        predictions[j] = preds
        future = series[t : t + h_max]
        errors[j] = np.mean(np.abs(preds - future), axis=0)
    return RollingResult(
        origins=origins,
        predictions=predictions,
        errors=errors,
        mean_by_var=errors.mean(axis=0),
        taus=taus,
    )
