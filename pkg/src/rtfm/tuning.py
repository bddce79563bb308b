"""Truncation-level grid construction and cross validation.

The grid runs from the largest absolute entry of the data down to the median
absolute entry, equi-spaced on the log scale. The CV score of a level
compares, per mode and per contiguous time fold, the loading space estimated
on the fold against the one estimated on its complement; the score sums the
normalised projection mismatches, so it lives in ``[0, K * L]`` and equals 0
when every fold reproduces the complement's spaces exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .estimator import refined_stage, stage_from_grams
from .exceptions import DegenerateDataError
from .moments import ModeStacks
from .tensor_ops import check_series


@dataclass
class CvConfig:
    grid_size: int = 50
    folds: int = 3
    iterations: int = 2

    def __post_init__(self):
        if self.grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass
class CvResult:
    tau: float
    grid: np.ndarray    # descending levels, length M
    scores: np.ndarray  # CV score per level


def tau_grid(series: np.ndarray, grid_size: int = 50) -> np.ndarray:
    """Descending log-equispaced grid from ``max |x|`` down to ``median |x|``.

    The median of an even count is the midpoint of the two central order
    statistics. Degenerate data (all zero, or zero median magnitude) cannot
    support a grid and raise.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    magnitudes = np.abs(np.asarray(series, dtype=float))
    hi = float(magnitudes.max())
    if hi <= 0.0:
        raise DegenerateDataError("all data entries are zero")
    lo = float(np.median(magnitudes))
    if lo <= 0.0:
        raise DegenerateDataError("median absolute entry is zero")
    grid = np.exp(np.linspace(math.log(hi), math.log(lo), grid_size))
    grid[0], grid[-1] = hi, lo
    return grid


def fold_slices(n: int, folds: int) -> list[slice]:
    """Contiguous time blocks of length ``ceil(n / folds)``; the last block
    may be short."""
    size = -(-n // folds)
    if size < 2:
        raise DegenerateDataError(f"folds of length {size} are too short to estimate on")
    out = []
    for ell in range(folds):
        start = size * ell
        stop = min(size * (ell + 1), n)
        if start >= stop:
            raise DegenerateDataError(f"fold {ell} is empty with n={n}, folds={folds}")
        out.append(slice(start, stop))
    return out


def _subspace_mismatch(e_out: np.ndarray, e_in: np.ndarray) -> float:
    # 1 - tr(P_out P_in) / r for orthonormal blocks; equals 0 iff equal spans
    r = e_out.shape[1]
    cross = e_out.T @ e_in
    return 1.0 - float(np.sum(cross * cross)) / r


def _staged_fit(stacks, ranks, iterations, ranges, grams, rows):
    p_rests = [stacks.p_rest(k) for k in range(len(ranks))]
    fit = stage_from_grams(grams, p_rests, rows, ranks)
    for _ in range(iterations):
        fit = refined_stage(stacks, fit, ranks, ranges)
    return fit


def cv_tau(
    series: np.ndarray, ranks: Sequence[int], config: CvConfig | None = None
) -> CvResult:
    """Select the truncation level by cross validation.

    For each grid level, loadings are estimated (at ``config.iterations``
    refinement stages) on every fold and on its complement; the score
    accumulates the per-mode subspace mismatches. Returns the argmin level,
    ties broken towards the larger level (less truncation).

    Stage-0 moments are assembled from per-fold Grams (Grams over disjoint
    time ranges add), so each grid level costs roughly one pass over the data
    plus the refinement sweeps.
    """
    series = check_series(series)
    config = config or CvConfig()
    n = series.shape[0]
    n_modes = series.ndim - 1
    grid = tau_grid(series, config.grid_size)
    slices = fold_slices(n, config.folds)
    scores = np.empty(grid.size)
    # the grid descends, so one set of stacks can be re-clipped in place
    stacks = ModeStacks(series, np.inf)
    for m, level in enumerate(grid):
        stacks.truncate_inplace(float(level))
        fold_grams = [
            [stacks.gram(k, [(sl.start, sl.stop)]) for k in range(n_modes)]
            for sl in slices
        ]
        total_grams = [sum(fg[k] for fg in fold_grams) for k in range(n_modes)]
        total = 0.0
        for ell, sl in enumerate(slices):
            n_in = sl.stop - sl.start
            in_ranges = [(sl.start, sl.stop)]
            out_ranges = [r for r in [(0, sl.start), (sl.stop, n)] if r[0] < r[1]]
            fit_in = _staged_fit(
                stacks, ranks, config.iterations, in_ranges, fold_grams[ell], n_in
            )
            out_grams = [total_grams[k] - fold_grams[ell][k] for k in range(n_modes)]
            fit_out = _staged_fit(
                stacks, ranks, config.iterations, out_ranges, out_grams, n - n_in
            )
            for e_out, e_in in zip(fit_out.e, fit_in.e):
                total += _subspace_mismatch(e_out, e_in)
        scores[m] = total
    best = int(np.argmin(scores))  # first minimum = largest level on ties
    return CvResult(tau=float(grid[best]), grid=grid, scores=scores)
