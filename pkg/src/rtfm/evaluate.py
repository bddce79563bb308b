"""Error metrics, Monte Carlo aggregation and the asymptotic-normality
diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .estimator import common_component, estimate_factors, estimate_loadings
from .exceptions import RankDeficientError
from .moments import truncate
from .tensor_ops import check_series, kron_omit, unfold_series

_PIVOT_TOL = 1e-10
_LOCAL_WINDOW = 10


def _orthonormal_basis(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis of col(a) via the eigendecomposition of a.T @ a.

    Rank deficiency (smallest eigenvalue below 1e-10 of the largest) is an
    error, never silently regularised.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    gram = a.T @ a
    vals, vecs = np.linalg.eigh(gram)
    if vals[-1] <= 0.0 or vals[0] <= _PIVOT_TOL * vals[-1]:
        raise RankDeficientError(
            f"matrix of shape {a.shape} is rank deficient (eigenvalues {vals})"
        )
    return a @ (vecs / np.sqrt(vals))


def loading_error(est: np.ndarray, truth: np.ndarray) -> float:
    """Loading-space distance ``sqrt(1 - tr(P_est P_truth) / r)`` where ``P``
    projects onto the column space.

    Symmetric, basis-free, in ``[0, 1]``; 0 at equal spaces, 1 at orthogonal
    ones. Both inputs must have full column rank.
    """
    b_est = _orthonormal_basis(est)
    b_truth = _orthonormal_basis(truth)
    if b_est.shape != b_truth.shape:
        raise ValueError(f"shape mismatch: {b_est.shape} vs {b_truth.shape}")
    r = b_est.shape[1]
    cross = b_est.T @ b_truth
    val = 1.0 - float(np.sum(cross * cross)) / r
    return math.sqrt(max(val, 0.0))


def common_error(est: np.ndarray, truth: np.ndarray, window="all") -> float:
    """Relative squared error of the common component over a time window.

    ``window`` is ``"all"``, ``"local"`` (the last ``min(10, n)`` points) or
    an integer ``w`` (the last ``min(w, n)`` points).
    """
    est = check_series(est)
    truth = check_series(truth)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    n = est.shape[0]
    if window == "all":
        w = n
    elif window == "local":
        w = min(_LOCAL_WINDOW, n)
    else:
        w = min(int(window), n)
        if w < 1:
            raise ValueError(f"invalid window {window!r}")
    diff = est[n - w :] - truth[n - w :]
    denom = float(np.sum(truth[n - w :] ** 2))
    if denom <= 0.0:
        raise ValueError("common component truth is zero on the window")
    return float(np.sum(diff * diff)) / denom


# ---------------------------------------------------------------------------
# Monte Carlo aggregation


@dataclass
class McSummary:
    """Per-metric mean and standard deviation over replications."""

    scenario: str
    count: int
    stats: dict[str, tuple[float, float]]

    @classmethod
    def from_records(cls, scenario: str, records: Sequence[dict]) -> "McSummary":
        if not records:
            raise ValueError("no replication records to summarise")
        keys = list(records[0].keys())
        stats = {}
        for key in keys:
            vals = np.asarray([float(rec[key]) for rec in records])
            mean = float(vals.mean())
            sd = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
            stats[key] = (mean, sd)
        return cls(scenario=scenario, count=len(records), stats=stats)


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov helpers


def ks_statistic(sample: np.ndarray) -> float:
    """Exact KS statistic of a sample against the standard normal CDF,
    scanning the full empirical CDF."""
    z = np.sort(np.asarray(sample, dtype=float).ravel())
    if z.size == 0:
        raise ValueError("empty sample")
    n = z.size
    cdf = ndtr(z)
    upper = np.max(np.arange(1, n + 1) / n - cdf)
    lower = np.max(cdf - np.arange(0, n) / n)
    return float(max(upper, lower))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sided KS critical value ``sqrt(-ln(alpha/2) / 2) /
    sqrt(n)``."""
    if n < 1 or not 0.0 < alpha < 1.0:
        raise ValueError("need n >= 1 and alpha in (0, 1)")
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


# ---------------------------------------------------------------------------
# asymptotic-normality diagnostic


def normality_diagnostic(
    series: np.ndarray, true_loadings: Sequence[np.ndarray], tau: float
) -> list[np.ndarray]:
    """Standardised loading deviations for the rank-(1, ..., 1) model.

    ``true_loadings`` holds one unit-norm vector per mode (the generated
    truth). Per mode ``k`` and coordinate ``i`` the score is

    ``Z_{k,i} = sqrt(n p_{-k}) (lhat_{k,i} - s_k l_{k,i}) / sqrt(Phi_{k,i})``

    where ``lhat_k`` is the stage-2 loading estimate, ``l_k`` the truth
    brought onto the same sqrt(p_k) scale, ``s_k`` the median sign alignment
    between the two, and ``Phi_{k,i}`` a plug-in variance built from the
    estimated factor second moment and the sample variance of the projected
    residual rows (residuals of the truncated data against the truncated
    fitted common component). Scores with a zero variance estimate are
    returned as NaN.
    """
    series = check_series(series)
    dims = series.shape[1:]
    n_modes = len(dims)
    if len(true_loadings) != n_modes:
        raise ValueError(f"need {n_modes} true loading vectors")
    truths = []
    for k, lam in enumerate(true_loadings):
        lam = np.asarray(lam, dtype=float).ravel()
        if lam.size != dims[k]:
            raise ValueError(f"mode {k} loading has size {lam.size}, expected {dims[k]}")
        norm = np.linalg.norm(lam)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"mode {k} true loading must have unit norm, got {norm}")
        truths.append(lam)

    n = series.shape[0]
    ranks = (1,) * n_modes
    fit = estimate_loadings(series, ranks, tau, iterations=2)[-1]
    factors = estimate_factors(series, fit, kappa=tau)
    gamma_f = float(np.mean(factors**2))
    chi_trunc = truncate(common_component(factors, fit), tau)
    x_trunc = truncate(series, tau)
    resid = x_trunc - chi_trunc

    scores = []
    for k, p_k in enumerate(dims):
        lam_hat = math.sqrt(p_k) * fit.e[k][:, 0]
        lam_true = math.sqrt(p_k) * truths[k]
        sign_med = float(np.median(np.sign(lam_hat * lam_true)))
        s_k = 1.0 if sign_med >= 0.0 else -1.0

        d = kron_omit([m for m in fit.e], k)          # (p_{-k}, 1), unit norm
        projected = (unfold_series(resid, k) @ d)[:, :, 0]   # (n, p_k)
        var = projected.var(axis=0, ddof=1)
        phi = np.where(var > 0.0, var / gamma_f, np.nan)
        p_rest = int(np.prod(dims, dtype=np.int64)) // p_k
        z = math.sqrt(n * p_rest) * (lam_hat - s_k * lam_true) / np.sqrt(phi)
        scores.append(z)
    return scores
