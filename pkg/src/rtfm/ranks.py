"""Factor-number selection by eigenvalue ratios, iterated over projections.

The per-mode factor number is the index maximising the ratio of consecutive
eigenvalues ``mu_j / (mu_{j+1} + rho)`` of the projected mode-k second
moment. Since the projection itself depends on the current rank guesses of
the other modes, the selection is iterated: start every mode at its cap
``r_max_k``, recompute projected spectra with the latest guesses, reselect,
and stop once no mode changes (or after ``max_passes``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DegenerateDataError
from .linalg import sym_eig
from .moments import ModeStacks
from .tensor_ops import check_series, kron_omit


def default_r_max(p: int) -> int:
    """Default rank cap for a mode of size ``p``: ``min(p // 2, p - 1, 20)``."""
    if p < 2:
        raise ValueError("rank selection needs mode size >= 2")
    return min(p // 2, p - 1, 20)


@dataclass
class RankConfig:
    """Settings for iterative rank selection.

    ``r_max=None`` applies :func:`default_r_max` per mode. ``rho=None``
    recomputes the ratio regulariser per mode and pass as the reciprocal of
    the leading projected eigenvalue, which makes the selection scale-free.
    """

    r_max: tuple[int, ...] | None = None
    max_passes: int = 10
    rho: float | None = None

    def resolve_r_max(self, dims: Sequence[int]) -> tuple[int, ...]:
        if self.r_max is None:
            return tuple(default_r_max(p) for p in dims)
        r_max = tuple(int(r) for r in self.r_max)
        if len(r_max) != len(dims):
            raise ValueError(f"need {len(dims)} rank caps, got {len(r_max)}")
        for r, p in zip(r_max, dims):
            if not 1 <= r <= p - 1:
                raise ValueError(f"rank cap {r} invalid for mode size {p}")
        return r_max


@dataclass
class RankResult:
    ranks: tuple[int, ...]
    trace: list[tuple[int, ...]] = field(default_factory=list)
    converged: bool = True


def ratio_select(eigvals: Sequence[float], r_max: int, rho: float) -> int:
    """``argmax_{1 <= j <= r_max} mu_j / (mu_{j+1} + rho)`` on a descending
    non-negative spectrum; ties go to the smallest ``j``."""
    vals = np.asarray(eigvals, dtype=float)
    if r_max < 1:
        raise ValueError("r_max must be >= 1")
    if vals.size < r_max + 1:
        raise ValueError(f"need at least {r_max + 1} eigenvalues, got {vals.size}")
    if not rho > 0.0:
        raise ValueError(f"rho must be positive, got {rho}")
    ratios = vals[:r_max] / (vals[1 : r_max + 1] + rho)
    return int(np.argmax(ratios)) + 1


def estimate_ranks(series: np.ndarray, tau, config: RankConfig | None = None) -> RankResult:
    """Iteratively select the per-mode factor numbers.

    Every pass recomputes, for each mode, the one-step projected second
    moment using the other modes' top eigenvectors at their current rank
    guesses, then applies :func:`ratio_select` to its top ``r_max_k + 1``
    eigenvalues. Non-convergence within ``max_passes`` is reported through
    ``converged=False`` on the result, not raised.
    """
    series = check_series(series)
    config = config or RankConfig()
    dims = series.shape[1:]
    n_modes = len(dims)
    r_max = config.resolve_r_max(dims)
    stacks = ModeStacks(series, tau)
    norm = [stacks.n * stacks.p_rest(k) for k in range(n_modes)]

    base_vectors = []
    for k in range(n_modes):
        g = stacks.gram(k) / norm[k]
        pairs = sym_eig((g + g.T) / 2.0, r_max[k])
        if pairs.values[0] <= 0.0:
            raise DegenerateDataError(f"mode {k} spectrum is degenerate")
        base_vectors.append(pairs.vectors)

    current = r_max
    trace = [current]
    converged = False
    for _ in range(config.max_passes):
        proposal = []
        for k in range(n_modes):
            blocks = [base_vectors[j][:, : current[j]] for j in range(n_modes)]
            d = kron_omit(blocks, k)
            g = stacks.projected_gram(k, d) / norm[k]
            vals = sym_eig((g + g.T) / 2.0, r_max[k] + 1).values
            if config.rho is not None:
                rho = config.rho
            else:
                if vals[0] <= 0.0:
                    raise DegenerateDataError(f"mode {k} projected spectrum is degenerate")
                rho = 1.0 / float(vals[0])
            proposal.append(ratio_select(vals, r_max[k], rho))
        proposal = tuple(proposal)
        trace.append(proposal)
        if proposal == current:
            converged = True
            break
        current = proposal
    return RankResult(ranks=trace[-1], trace=trace, converged=converged)
