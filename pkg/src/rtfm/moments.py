"""Element-wise truncation and truncated mode-k second-moment matrices.

The truncation level ``tau`` is a positive float; ``numpy.inf`` is a
first-class value and selects the classical (non-robust) estimator through
the same code path. Estimation routines accept either one scalar level or a
per-mode sequence (the mode-k moment then truncates at the mode-k level).

:class:`ModeStacks` holds the per-mode stacks of unfolded truncated data and
is the single numeric route to every second-moment matrix in the package:
the public functions, the staged estimator and cross validation all reduce
to Grams of (projected) stack rows, summed over time ranges. Grams over
disjoint ranges add, which is what makes leave-one-fold-out estimation cheap.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .tensor_ops import check_series, unfold_series


def _check_tau(tau: float) -> float:
    tau = float(tau)
    if not tau > 0.0 or math.isnan(tau):
        raise ValueError(f"truncation level must be positive, got {tau}")
    return tau


def truncate(x: np.ndarray, tau: float) -> np.ndarray:
    """Cap magnitudes at ``tau`` preserving signs: ``sign(x) * min(|x|, tau)``.

    ``tau = inf`` returns the input unchanged (no copy; no function here ever
    mutates its input).
    """
    tau = _check_tau(tau)
    x = np.asarray(x, dtype=float)
    if math.isinf(tau):
        return x
    return np.clip(x, -tau, tau)


def per_mode_tau(tau, n_modes: int) -> tuple[float, ...]:
    """Broadcast a scalar level to every mode; validate a per-mode sequence."""
    if np.ndim(tau) == 0:
        return (_check_tau(tau),) * n_modes
    levels = tuple(_check_tau(t) for t in tau)
    if len(levels) != n_modes:
        raise ValueError(f"need {n_modes} truncation levels, got {len(levels)}")
    return levels


Ranges = Sequence[tuple[int, int]]


class ModeStacks:
    """Per-mode stacks of unfolded truncated data with Gram helpers.

    Mode ``k`` is held as a ``(p_k, n * p_{-k})`` matrix whose columns are
    the mode-k fibers grouped time-block by time-block (the columns of
    ``unfold(x_t, k)`` occupy block ``t``), so Grams over time ranges are
    single matrix products on contiguous column views. Gram methods return
    *unnormalised* sums over half-open time ranges; scaling by
    ``1 / (rows * p_{-k})`` is the caller's job.
    """

    def __init__(self, series: np.ndarray, tau, modes: Sequence[int] | None = None):
        series = check_series(series)
        self.n = series.shape[0]
        self.dims = series.shape[1:]
        self.levels = per_mode_tau(tau, len(self.dims))
        truncated: dict[float, np.ndarray] = {}
        self._flat: dict[int, np.ndarray] = {}
        for k in range(len(self.dims)) if modes is None else modes:
            level = self.levels[k]
            if level not in truncated:
                truncated[level] = truncate(series, level)
            self._flat[k] = self._flatten(truncated[level], k)

    @staticmethod
    def _flatten(x: np.ndarray, k: int) -> np.ndarray:
        a = np.moveaxis(x, k + 1, 0)                       # (p_k, n, rest...)
        a = a.transpose(0, 1, *range(a.ndim - 1, 1, -1))   # reverse rest axes
        # a genuine copy, never a view: the stacks may be clipped in place
        # and must not alias caller data (the permutations above can cancel
        # against an already-permuted input, leaving a contiguous view)
        return a.copy().reshape(a.shape[0], -1)

    def stack(self, k: int) -> np.ndarray:
        """``(n, p_k, p_{-k})`` view; entry ``[t]`` equals ``unfold(x_t, k)``."""
        z = self._flat[k]
        return z.reshape(z.shape[0], self.n, -1).transpose(1, 0, 2)

    def truncate_inplace(self, tau: float) -> None:
        """Tighten every mode's truncation level to ``tau`` by clipping the
        stored stacks in place.

        Only valid for ``tau`` at or below the current levels (truncation is
        idempotent and monotone, so re-clipping equals clipping the raw data
        at ``tau``). Cross validation walks its descending grid this way
        instead of rebuilding stacks per level.
        """
        tau = _check_tau(tau)
        if tau > min(self.levels[k] for k in self._flat):
            raise ValueError(
                f"cannot relax truncation in place ({tau} above current levels)"
            )
        for z in self._flat.values():
            np.minimum(np.maximum(z, -tau, out=z), tau, out=z)
        self.levels = tuple(min(level, tau) for level in self.levels)

    def p_rest(self, k: int) -> int:
        return self._flat[k].shape[1] // self.n

    @staticmethod
    def _normalise_ranges(ranges: Ranges | None, n: int) -> list[tuple[int, int]]:
        if ranges is None:
            return [(0, n)]
        out = []
        for a, b in ranges:
            if not 0 <= a < b <= n:
                raise ValueError(f"bad time range ({a}, {b}) for n={n}")
            out.append((int(a), int(b)))
        return out

    def rows(self, ranges: Ranges | None = None) -> int:
        return sum(b - a for a, b in self._normalise_ranges(ranges, self.n))

    def gram(self, k: int, ranges: Ranges | None = None) -> np.ndarray:
        """``sum_t unfold_t @ unfold_t.T`` over the given time ranges."""
        z = self._flat[k]
        p_rest = self.p_rest(k)
        total = None
        for a, b in self._normalise_ranges(ranges, self.n):
            w = z[:, a * p_rest : b * p_rest]
            g = w @ w.T
            total = g if total is None else total + g
        return total

    def projected_gram(
        self, k: int, d: np.ndarray, ranges: Ranges | None = None
    ) -> np.ndarray:
        """``sum_t (unfold_t @ d) @ (unfold_t @ d).T`` over the ranges; the
        ``p_{-k} x p_{-k}`` projector is never materialised."""
        d = np.atleast_2d(np.asarray(d, dtype=float))
        if d.shape[0] != self.p_rest(k):
            raise ValueError(
                f"projection matrix has {d.shape[0]} rows, expected {self.p_rest(k)}"
            )
        batched = self.stack(k)
        p_k = batched.shape[1]
        total = None
        for a, b in self._normalise_ranges(ranges, self.n):
            thin = batched[a:b] @ d                      # (rows, p_k, r_rest)
            w = thin.transpose(1, 0, 2).reshape(p_k, -1)
            g = w @ w.T
            total = g if total is None else total + g
        return total


def _symmetrised(g: np.ndarray, scale: float) -> np.ndarray:
    g = g / scale
    return (g + g.T) / 2.0


def mode_second_moment(series: np.ndarray, mode: int, tau: float) -> np.ndarray:
    """Truncated mode-k second-moment matrix.

    ``(n p_{-k})^{-1} sum_t unfold(trunc(x_t), k) @ unfold(trunc(x_t), k).T``,
    a symmetric PSD ``p_k x p_k`` matrix.
    """
    series = check_series(series)
    levels = [math.inf] * (series.ndim - 1)
    levels[mode] = float(tau)
    stacks = ModeStacks(series, levels, modes=(mode,))
    return _symmetrised(stacks.gram(mode), stacks.n * stacks.p_rest(mode))


def projected_second_moment(
    series: np.ndarray, mode: int, tau: float, d: np.ndarray
) -> np.ndarray:
    """Mode-k second moment of the data projected onto ``d``'s column space,
    computed from the thin products ``unfold_t @ d``."""
    series = check_series(series)
    levels = [math.inf] * (series.ndim - 1)
    levels[mode] = float(tau)
    stacks = ModeStacks(series, levels, modes=(mode,))
    return _symmetrised(stacks.projected_gram(mode, d), stacks.n * stacks.p_rest(mode))


def theoretical_tau(
    n: int,
    dims: Sequence[int],
    mode: int,
    omega: float,
    epsilon: float,
    regime: str = "independent",
) -> float:
    """Reference truncation level for mode ``mode`` as a function of the
    moment order ``2 + 2*epsilon`` and the scale ``omega``.

    ``independent`` regime (idiosyncratic cross-sections independent):
    ``omega * (n p_{-k} / log(n p_{-k}))**(1 / (2 + 2 epsilon))``.
    ``random_field`` regime (mixing random field):
    ``omega * (n p_{-k} / log(n p)**K)**(1 / (2 + 2 epsilon))``.

    Mostly a reference utility; in practice the level is tuned by cross
    validation.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    if omega <= 0.0:
        raise ValueError(f"omega must be positive, got {omega}")
    dims = tuple(int(d) for d in dims)
    if not 0 <= mode < len(dims):
        raise ValueError(f"mode {mode} out of range for dims {dims}")
    p = int(np.prod(dims, dtype=np.int64))
    p_rest = p // dims[mode]
    np_rest = float(n) * p_rest
    if regime == "independent":
        denom = math.log(np_rest)
    elif regime == "random_field":
        denom = math.log(float(n) * p) ** len(dims)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    if denom <= 0.0:
        raise ValueError("sample size too small for the reference truncation level")
    return float(omega * (np_rest / denom) ** (1.0 / (2.0 + 2.0 * epsilon)))
