"""Loading-space and core-factor estimation for Tucker-type tensor factor
models under element-wise truncation.

The loading estimator runs in stages: stage 0 eigendecomposes the truncated
mode-k second moments (a HOSVD of the truncated data), and each refinement
stage eigendecomposes the moments of the data projected onto the previous
stage's loading spaces of the *other* modes. One stage is one full sweep over
all modes, with every projection built from the previous stage (all-at-once
rather than mode-by-mode updates), so the output is a deterministic function
of the input. Two refinement stages are the default.

Loading matrices carry the ``sqrt(p_k)``-scaling convention: the columns of
``e_k`` are orthonormal and ``lambda_k = sqrt(p_k) * e_k``, so that
``lambda_k.T @ lambda_k = p_k * I``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import DegenerateDataError
from .linalg import sym_eig
from .moments import ModeStacks, truncate
from .tensor_ops import check_series, kron_omit, series_multi_mode_product


@dataclass
class LoadingSet:
    """Per-mode loading estimates.

    Attributes
    ----------
    e : tuple of (p_k, r_k) arrays
        Orthonormal eigenvector blocks, sign-canonicalised.
    eigenvalues : tuple of (p_k,) arrays
        Full descending spectra of the matrices the blocks came from.
    """

    e: tuple[np.ndarray, ...]
    eigenvalues: tuple[np.ndarray, ...]

    @property
    def n_modes(self) -> int:
        return len(self.e)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(m.shape[0] for m in self.e)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(m.shape[1] for m in self.e)

    @property
    def loadings(self) -> tuple[np.ndarray, ...]:
        """sqrt(p_k)-scaled loading matrices."""
        return tuple(np.sqrt(m.shape[0]) * m for m in self.e)


def _check_ranks(dims: Sequence[int], ranks: Sequence[int]) -> tuple[int, ...]:
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(dims):
        raise ValueError(f"need {len(dims)} ranks, got {len(ranks)}")
    for k, (r, p) in enumerate(zip(ranks, dims)):
        if not 1 <= r <= p:
            raise ValueError(f"rank {r} invalid for mode {k} of size {p}")
    return ranks


def _decompose(g: np.ndarray, scale: float, rank: int, mode: int):
    g = g / scale
    pairs = sym_eig((g + g.T) / 2.0, g.shape[0])
    if pairs.values[0] <= 0.0:
        raise DegenerateDataError(
            f"mode {mode} second moment has no positive eigenvalue; "
            "the data are degenerate (all zero?)"
        )
    return pairs.vectors[:, :rank], pairs.values


def stage_from_grams(
    grams: Sequence[np.ndarray], p_rests: Sequence[int], rows: int, ranks: Sequence[int]
) -> LoadingSet:
    """Assemble a stage from unnormalised per-mode Grams accumulated over
    ``rows`` time points (used directly by cross validation, where Grams over
    folds are combined additively)."""
    blocks, spectra = [], []
    for k, r in enumerate(ranks):
        vecs, vals = _decompose(grams[k], rows * p_rests[k], r, k)
        blocks.append(vecs)
        spectra.append(vals)
    return LoadingSet(e=tuple(blocks), eigenvalues=tuple(spectra))


def initial_stage(stacks: ModeStacks, ranks: Sequence[int], ranges=None) -> LoadingSet:
    """Stage 0 from precomputed stacks, restricted to the given time ranges."""
    grams = [stacks.gram(k, ranges) for k in range(len(ranks))]
    p_rests = [stacks.p_rest(k) for k in range(len(ranks))]
    return stage_from_grams(grams, p_rests, stacks.rows(ranges), ranks)


def refined_stage(
    stacks: ModeStacks, current: LoadingSet, ranks: Sequence[int], ranges=None
) -> LoadingSet:
    """One projection sweep from precomputed stacks: every mode is projected
    onto the *input* set's other-mode loading spaces."""
    scale = stacks.rows(ranges)
    blocks, spectra = [], []
    for k, r in enumerate(ranks):
        d = kron_omit(current.e, k)
        vecs, vals = _decompose(
            stacks.projected_gram(k, d, ranges), scale * stacks.p_rest(k), r, k
        )
        blocks.append(vecs)
        spectra.append(vals)
    return LoadingSet(e=tuple(blocks), eigenvalues=tuple(spectra))


def initial_loadings(series: np.ndarray, ranks: Sequence[int], tau) -> LoadingSet:
    """Stage-0 estimator: top-``r_k`` eigenvectors of the truncated mode-k
    second moment, per mode.

    For ``K = 1`` this is the classical PC estimator applied to truncated
    data, and it is also the final estimator (refinement is a no-op).
    """
    series = check_series(series)
    ranks = _check_ranks(series.shape[1:], ranks)
    return initial_stage(ModeStacks(series, tau), ranks)


def refine_loadings(
    series: np.ndarray, current: LoadingSet, ranks: Sequence[int], tau
) -> LoadingSet:
    """One projection sweep: for every mode, eigendecompose the second moment
    of the data projected onto the *input* set's other-mode loading spaces."""
    series = check_series(series)
    ranks = _check_ranks(series.shape[1:], ranks)
    if current.dims != series.shape[1:]:
        raise ValueError(
            f"loading set dims {current.dims} do not match series {series.shape[1:]}"
        )
    return refined_stage(ModeStacks(series, tau), current, ranks)


def estimate_loadings(
    series: np.ndarray, ranks: Sequence[int], tau, iterations: int = 2
) -> list[LoadingSet]:
    """Run the staged estimator and return every stage, index 0 holding the
    initial estimate and index ``iterations`` the final one."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    series = check_series(series)
    ranks = _check_ranks(series.shape[1:], ranks)
    stacks = ModeStacks(series, tau)
    stages = [initial_stage(stacks, ranks)]
    for _ in range(iterations):
        stages.append(refined_stage(stacks, stages[-1], ranks))
    return stages


def estimate_factors(series: np.ndarray, loadings: LoadingSet, kappa) -> np.ndarray:
    """Core factor series: cross-sectional weighted average of the truncated
    observations, ``f_t = p^{-1} * trunc(x_t, kappa) x_k lambda_k.T``.

    Truncating again here (``kappa`` finite) guards the aggregation step
    against anomalous cells; ``kappa = inf`` disables it.
    """
    series = check_series(series)
    if loadings.dims != series.shape[1:]:
        raise ValueError(
            f"loading set dims {loadings.dims} do not match series {series.shape[1:]}"
        )
    p = float(np.prod(series.shape[1:], dtype=np.int64))
    x = truncate(series, float(kappa))
    return series_multi_mode_product(x, loadings.loadings, transpose=True) / p


def common_component(factors: np.ndarray, loadings: LoadingSet) -> np.ndarray:
    """Reconstruct the factor-driven part of the data,
    ``chi_t = f_t x_1 lambda_1 ... x_K lambda_K``."""
    factors = check_series(factors)
    if loadings.ranks != factors.shape[1:]:
        raise ValueError(
            f"loading set ranks {loadings.ranks} do not match factors {factors.shape[1:]}"
        )
    return series_multi_mode_product(factors, loadings.loadings)
