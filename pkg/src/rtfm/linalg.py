"""Symmetric eigendecomposition, sign canonicalisation and Varimax rotation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericError

_SYM_TOL = 1e-8
_RESIDUAL_TOL = 1e-8


@dataclass
class EigenPairs:
    """Top eigenvalues (descending) and matching orthonormal eigenvectors."""

    values: np.ndarray   # (r,)
    vectors: np.ndarray  # (p, r), columns match values


def canonical_sign(vectors: np.ndarray) -> np.ndarray:
    """Flip column signs so the largest-magnitude entry of each column is
    positive (ties broken by lowest row index).

    Eigenvectors are only identified up to sign; fixing the sign makes every
    downstream iteration deterministic. Raises on a zero column.
    """
    vectors = np.array(vectors, dtype=float, copy=True)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        lead = col[np.argmax(np.abs(col))]
        if lead == 0.0:
            raise ValueError(f"column {j} is identically zero")
        if lead < 0.0:
            vectors[:, j] = -col
    return vectors


def sym_eig(s: np.ndarray, r: int) -> EigenPairs:
    """Top-``r`` eigenpairs of a symmetric matrix, descending and
    sign-canonicalised.

    The input is symmetrised as ``(s + s.T) / 2`` (it must be symmetric to
    1e-8 to begin with). Residuals ``|s v - mu v|`` are checked against
    ``1e-8 * (1 + |mu_1|)``.
    """
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    p = s.shape[0]
    if not 1 <= r <= p:
        raise ValueError(f"requested {r} eigenpairs from an order-{p} matrix")
    asym = np.max(np.abs(s - s.T)) if p > 1 else 0.0
    scale = max(1.0, float(np.max(np.abs(s))))
    if asym > _SYM_TOL * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    sym = (s + s.T) / 2.0
    try:
        values, vectors = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as err:
        raise NumericError(f"eigendecomposition did not converge: {err}") from err
    order = np.argsort(values)[::-1][:r]
    values = values[order]
    # eigh returns orthonormal columns, so canonicalisation cannot hit a zero
    # column here
    vectors = canonical_sign(vectors[:, order])
    residual = np.linalg.norm(sym @ vectors - vectors * values, axis=0)
    bound = _RESIDUAL_TOL * (1.0 + abs(float(values[0])))
    worst = float(residual.max())
    if worst > bound:
        raise NumericError(
            f"eigenpair residual {worst:.3e} exceeds tolerance {bound:.3e}"
        )
    return EigenPairs(values=values, vectors=vectors)


def varimax_criterion(loadings: np.ndarray) -> float:
    """Raw (un-normalised) Varimax criterion: sum over columns of the variance
    of the squared loadings."""
    a2 = np.asarray(loadings, dtype=float) ** 2
    return float(np.sum(a2.var(axis=0)))


def varimax(
    loadings: np.ndarray, tol: float = 1e-8, max_sweeps: int = 200
) -> tuple[np.ndarray, np.ndarray]:
    """Raw Varimax rotation by cyclic pairwise plane rotations.

    Returns ``(rotated, rotation)`` with ``rotated = loadings @ rotation`` and
    ``rotation`` orthogonal. Each pairwise rotation maximises the criterion
    for that pair, so the criterion never decreases; sweeps stop once the
    criterion improves by less than ``tol`` or after ``max_sweeps``.

    No Kaiser row normalisation is applied.
    """
    a = np.array(loadings, dtype=float, copy=True)
    if a.ndim != 2:
        raise ValueError("loadings must be a 2-d array")
    p, r = a.shape
    rotation = np.eye(r)
    if r < 2:
        return a, rotation
    crit = varimax_criterion(a)
    for _ in range(max_sweeps):
        for i in range(r - 1):
            for j in range(i + 1, r):
                u = a[:, i] ** 2 - a[:, j] ** 2
                v = 2.0 * a[:, i] * a[:, j]
                su, sv = u.sum(), v.sum()
                num = 2.0 * (u @ v) - 2.0 * su * sv / p
                den = (u @ u - v @ v) - (su**2 - sv**2) / p
                theta = 0.25 * np.arctan2(num, den)
                if theta == 0.0:
                    continue
                c, s = np.cos(theta), np.sin(theta)
                g = np.array([[c, -s], [s, c]])
                a[:, [i, j]] = a[:, [i, j]] @ g
                rotation[:, [i, j]] = rotation[:, [i, j]] @ g
        new_crit = varimax_criterion(a)
        if new_crit - crit < tol:
            break
        crit = new_crit
    return a, rotation
