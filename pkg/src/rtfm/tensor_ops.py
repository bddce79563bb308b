"""Dense order-K tensor algebra: unfolding, folding, mode products, Kronecker
products and vectorisation.

Conventions
-----------
* A tensor is a ``numpy.ndarray`` of ``ndim == K >= 1``; a time series of
  tensors is an array of shape ``(n, p_1, ..., p_K)`` with time on axis 0.
* The canonical linear order is first-index-fastest (Fortran order), so
  ``vec(x) == x.ravel(order="F")``.
* Mode-k unfolding follows the Kolda-Bader convention: column ``j`` of
  ``unfold(x, k)`` is the mode-k fiber at the multi-index with offset
  ``j = sum_{l != k} i_l * J_l`` where ``J_l = prod_{m < l, m != k} p_m``.
  Under this convention ``vec(x @_k A_k for all k) == kron(A_K, ..., A_1) @
  vec(x)``.
* Modes are 0-based in code; file formats and reports document the 1-based
  mapping.

All functions are pure: inputs are never mutated.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np


def _check_mode(ndim: int, mode: int) -> None:
    if not 0 <= mode < ndim:
        raise ValueError(f"mode {mode} out of range for order-{ndim} tensor")


def check_series(series: np.ndarray) -> np.ndarray:
    """Validate a tensor time series of shape ``(n, p_1, ..., p_K)``."""
    series = np.asarray(series, dtype=float)
    if series.ndim < 2:
        raise ValueError("a tensor series needs a time axis plus K >= 1 tensor axes")
    if series.shape[0] < 1 or min(series.shape[1:]) < 1:
        raise ValueError(f"invalid series shape {series.shape}")
    return series


def vec(x: np.ndarray) -> np.ndarray:
    """Vectorise in the canonical (first-index-fastest) order."""
    return np.ravel(x, order="F")


def unvec(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.reshape(v, tuple(shape), order="F")


def frobenius_norm(x: np.ndarray) -> float:
    """Frobenius norm of a tensor (root sum of squared entries)."""
    return float(np.linalg.norm(np.ravel(x)))


def unfold(x: np.ndarray, mode: int) -> np.ndarray:
    """Mode-k unfolding: the ``p_k x p_{-k}`` matrix of mode-k fibers."""
    x = np.asarray(x)
    _check_mode(x.ndim, mode)
    return np.reshape(np.moveaxis(x, mode, 0), (x.shape[mode], -1), order="F")


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`: rebuild the tensor with ``shape`` from its
    mode-k unfolding."""
    m = np.asarray(m)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), mode)
    rest = shape[:mode] + shape[mode + 1 :]
    expected = (shape[mode], int(np.prod(rest, dtype=np.int64)))
    if m.ndim != 2 or m.shape != expected:
        raise ValueError(f"matrix shape {m.shape} does not match unfolding {expected}")
    return np.moveaxis(np.reshape(m, (shape[mode],) + rest, order="F"), 0, mode)


def mode_product(x: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Mode-k product ``x @_k a`` with an ``m x p_k`` matrix ``a``.

    Satisfies ``unfold(mode_product(x, a, k), k) == a @ unfold(x, k)``.
    """
    x = np.asarray(x)
    a = np.asarray(a)
    _check_mode(x.ndim, mode)
    if a.ndim != 2 or a.shape[1] != x.shape[mode]:
        raise ValueError(
            f"matrix of shape {a.shape} cannot act on mode {mode} of size {x.shape[mode]}"
        )
    return np.moveaxis(np.tensordot(a, x, axes=(1, mode)), 0, mode)


def multi_mode_product(
    x: np.ndarray, mats: Sequence[np.ndarray], transpose: bool = False
) -> np.ndarray:
    """Apply one matrix per mode, in mode order 0..K-1.

    With ``transpose=True`` each matrix acts transposed, which is the shape
    needed when projecting data onto loading spaces.
    """
    x = np.asarray(x)
    if len(mats) != x.ndim:
        raise ValueError(f"need {x.ndim} matrices, got {len(mats)}")
    out = x
    for mode, a in enumerate(mats):
        out = mode_product(out, np.asarray(a).T if transpose else a, mode)
    return out


def series_mode_product(series: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Mode-k product applied to every tensor of a series at once."""
    series = np.asarray(series)
    _check_mode(series.ndim - 1, mode)
    return np.moveaxis(np.tensordot(a, series, axes=(1, mode + 1)), 0, mode + 1)


def series_multi_mode_product(
    series: np.ndarray, mats: Sequence[np.ndarray], transpose: bool = False
) -> np.ndarray:
    """Per-time multi-mode product over a whole series."""
    out = np.asarray(series)
    if len(mats) != out.ndim - 1:
        raise ValueError(f"need {out.ndim - 1} matrices, got {len(mats)}")
    for mode, a in enumerate(mats):
        out = series_mode_product(out, np.asarray(a).T if transpose else a, mode)
    return out


def unfold_series(series: np.ndarray, mode: int) -> np.ndarray:
    """Stack per-time mode-k unfoldings into an ``(n, p_k, p_{-k})`` array.

    ``unfold_series(s, k)[t]`` equals ``unfold(s[t], k)`` with the same column
    order.
    """
    series = np.asarray(series)
    _check_mode(series.ndim - 1, mode)
    a = np.moveaxis(series, mode + 1, 1)
    # reversing the trailing axes makes a C-order reshape equal the per-time
    # Fortran-order unfolding
    a = a.transpose(0, 1, *range(a.ndim - 1, 1, -1))
    return a.reshape(series.shape[0], series.shape[mode + 1], -1)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of two matrices."""
    a = np.atleast_2d(np.asarray(a))
    b = np.atleast_2d(np.asarray(b))
    return np.kron(a, b)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    """``kron(mats[K-1], ..., kron(mats[1], mats[0]))`` -- the ordering that
    matches the canonical vec convention. Empty input gives the 1x1 identity."""
    seq = [np.atleast_2d(np.asarray(m)) for m in reversed(list(mats))]
    if not seq:
        return np.ones((1, 1))
    return reduce(np.kron, seq)


def kron_omit(mats: Sequence[np.ndarray], mode: int) -> np.ndarray:
    """:func:`kron_all` over all matrices except ``mats[mode]``.

    This builds the mode-k companion matrix: for loadings it is
    ``kron(L_K, ..., L_{k+1}, L_{k-1}, ..., L_1)``, the matrix pairing with
    ``unfold(x, k)`` on the right.
    """
    _check_mode(len(mats), mode)
    return kron_all([m for j, m in enumerate(mats) if j != mode])
