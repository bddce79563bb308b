import numpy as np
import pytest

from rtfm.estimator import (
    LoadingSet,
    common_component,
    estimate_factors,
    estimate_loadings,
    initial_loadings,
    refine_loadings,
)
from rtfm.evaluate import loading_error
from rtfm.exceptions import DegenerateDataError
from rtfm.linalg import canonical_sign, sym_eig
from rtfm.tensor_ops import kron_omit, series_multi_mode_product, unfold

pytestmark = pytest.mark.property


def orthogonal_loadings(rng, dims, ranks):
    """Exact sqrt(p_k)-orthonormal loadings: lambda.T @ lambda = p_k I."""
    out = []
    for p, r in zip(dims, ranks):
        q, _ = np.linalg.qr(rng.standard_normal((p, r)))
        out.append(np.sqrt(p) * q)
    return out


def noiseless_series(rng, dims, ranks, n):
    loadings = orthogonal_loadings(rng, dims, ranks)
    factors = rng.standard_normal((n,) + tuple(ranks))
    x = series_multi_mode_product(factors, loadings)
    return x, loadings, factors


class TestInitialLoadings:
    def test_noiseless_rank_one_recovery(self, rng):
        x, loadings, _ = noiseless_series(rng, (6, 5, 4), (1, 1, 1), 30)
        fit = initial_loadings(x, (1, 1, 1), np.inf)
        for k in range(3):
            assert loading_error(fit.e[k], loadings[k]) <= 1e-8

    def test_k1_equals_classical_pc(self, rng):
        x = rng.standard_normal((40, 7))
        fit = initial_loadings(x, (3,), np.inf)
        gamma = sum(np.outer(row, row) for row in x) / 40
        pairs = sym_eig(gamma, 7)
        assert np.allclose(fit.e[0], pairs.vectors[:, :3], atol=1e-10)
        assert np.allclose(fit.eigenvalues[0], pairs.values, atol=1e-10)

    def test_zero_series_reports_degenerate(self):
        with pytest.raises(DegenerateDataError):
            initial_loadings(np.zeros((5, 3, 2)), (1, 1), np.inf)

    def test_rank_exceeding_dimension(self, rng):
        with pytest.raises(ValueError):
            initial_loadings(rng.standard_normal((4, 3, 2)), (4, 1), np.inf)

    def test_loading_set_invariants(self, rng):
        x = rng.standard_normal((20, 5, 4))
        fit = initial_loadings(x, (2, 2), 1.5)
        for k, p in enumerate((5, 4)):
            assert np.linalg.norm(fit.e[k].T @ fit.e[k] - np.eye(2)) <= 1e-8
            assert np.array_equal(fit.loadings[k], np.sqrt(p) * fit.e[k])
            vals = fit.eigenvalues[k]
            assert np.all(np.diff(vals) <= 1e-12) and np.all(vals >= -1e-10)


class TestRefineLoadings:
    def test_k1_refinement_is_identity(self, rng):
        x = rng.standard_normal((30, 6))
        fit0 = initial_loadings(x, (2,), 1.0)
        fit1 = refine_loadings(x, fit0, (2,), 1.0)
        assert np.array_equal(fit0.e[0], fit1.e[0])

    def test_noiseless_fixed_point(self, rng):
        x, loadings, _ = noiseless_series(rng, (6, 5, 4), (2, 2, 1), 40)
        fit0 = initial_loadings(x, (2, 2, 1), np.inf)
        fit1 = refine_loadings(x, fit0, (2, 2, 1), np.inf)
        for k in range(3):
            assert loading_error(fit1.e[k], loadings[k]) <= 1e-8

    def test_projected_eigenvalues_match_factor_moments(self, rng):
        """With the true loading spaces as projections and no noise, the
        projected spectra are p_k times the (diagonal) factor second moments."""
        dims, ranks, n = (7, 6, 5), (2, 2, 2), 16
        loadings = orthogonal_loadings(rng, dims, ranks)
        # diagonal mode-k factor moments: one active factor cell per time point
        factors = np.zeros((n,) + ranks)
        levels = (3.0, 2.2, 1.5, 0.9, 1.1, 0.6, 2.8, 0.4)
        for t in range(n):
            idx = np.unravel_index(t % 8, ranks)
            factors[(t,) + idx] = levels[t % 8]
        x = series_multi_mode_product(factors, loadings)
        truth = LoadingSet(
            e=tuple(lam / np.sqrt(lam.shape[0]) for lam in loadings),
            eigenvalues=tuple(np.zeros(p) for p in dims),
        )
        fit = refine_loadings(x, truth, ranks, np.inf)
        for k, p_k in enumerate(dims):
            gamma_f = np.zeros((ranks[k], ranks[k]))
            for t in range(n):
                m = unfold(factors[t], k)
                gamma_f += m @ m.T / n
            assert np.linalg.norm(gamma_f - np.diag(np.diag(gamma_f))) <= 1e-12
            expected = np.sort(p_k * np.diag(gamma_f))[::-1]
            assert np.allclose(fit.eigenvalues[k][: ranks[k]], expected, atol=1e-8)


class TestEstimateLoadings:
    def test_zero_iterations_reproduces_initial(self, rng):
        x = rng.standard_normal((25, 4, 3))
        stages = estimate_loadings(x, (2, 2), 1.0, iterations=0)
        fit0 = initial_loadings(x, (2, 2), 1.0)
        assert len(stages) == 1
        for k in range(2):
            assert np.array_equal(stages[0].e[k], fit0.e[k])

    def test_deterministic_and_composes(self, rng):
        x = rng.standard_normal((25, 5, 4, 3))
        a = estimate_loadings(x, (2, 1, 2), 0.9, 2)
        b = estimate_loadings(x, (2, 1, 2), 0.9, 2)
        manual = [initial_loadings(x, (2, 1, 2), 0.9)]
        manual.append(refine_loadings(x, manual[0], (2, 1, 2), 0.9))
        manual.append(refine_loadings(x, manual[1], (2, 1, 2), 0.9))
        for sa, sb, sm in zip(a, b, manual):
            for ka, kb, km in zip(sa.e, sb.e, sm.e):
                assert np.array_equal(ka, kb)
                assert np.array_equal(ka, km)

    def test_scale_equivariance(self, rng):
        x = rng.standard_normal((30, 4, 3)) * 2
        c = 3.7
        base = estimate_loadings(x, (2, 2), 1.1, 2)[-1]
        scaled = estimate_loadings(c * x, (2, 2), c * 1.1, 2)[-1]
        for k in range(2):
            pi_a = base.e[k] @ base.e[k].T
            pi_b = scaled.e[k] @ scaled.e[k].T
            assert np.linalg.norm(pi_a - pi_b) <= 1e-10

    def test_k1_matches_standalone_truncated_pca(self, rng):
        """Independently coded reference: clip, average outer products,
        eigendecompose, canonicalise."""
        x = rng.standard_normal((50, 8)) * 3
        tau = 1.8
        stages = estimate_loadings(x, (3,), tau, 2)
        clipped = np.clip(x, -tau, tau)
        gamma = clipped.T @ clipped / 50
        vals, vecs = np.linalg.eigh(gamma)
        order = np.argsort(vals)[::-1][:3]
        ref = canonical_sign(vecs[:, order])
        for stage in stages:
            assert np.allclose(np.sqrt(8) * ref, stage.loadings[0], atol=1e-10)

    def test_per_mode_tau(self, rng):
        """Each mode's initial moment truncates at that mode's own level."""
        x = rng.standard_normal((20, 4, 3))
        a = estimate_loadings(x, (2, 2), (0.9, 1.5), 0)[0]
        b = estimate_loadings(x, (2, 2), (0.9, 99.0), 0)[0]
        c = estimate_loadings(x, (2, 2), (99.0, 1.5), 0)[0]
        assert np.array_equal(a.e[0], b.e[0])
        assert np.array_equal(a.e[1], c.e[1])
        assert not np.array_equal(a.e[1], b.e[1])


class TestFactorsAndCommonComponent:
    def test_exact_factor_recovery_with_true_loadings(self, rng):
        dims, ranks = (6, 5, 4), (2, 2, 1)
        x, loadings, factors = noiseless_series(rng, dims, ranks, 20)
        lset = LoadingSet(
            e=tuple(lam / np.sqrt(lam.shape[0]) for lam in loadings),
            eigenvalues=tuple(np.zeros(p) for p in dims),
        )
        f_hat = estimate_factors(x, lset, np.inf)
        assert np.max(np.abs(f_hat - factors)) <= 1e-10

    def test_kappa_above_max_is_noop(self, rng):
        x = rng.standard_normal((10, 4, 3))
        fit = estimate_loadings(x, (2, 1), np.inf, 1)[-1]
        a = estimate_factors(x, fit, np.inf)
        b = estimate_factors(x, fit, np.abs(x).max() + 1)
        assert np.array_equal(a, b)

    def test_zero_data_zero_factors(self, rng):
        x = rng.standard_normal((10, 4, 3))
        fit = estimate_loadings(x, (2, 1), np.inf, 1)[-1]
        assert not estimate_factors(np.zeros_like(x), fit, 1.0).any()

    def test_noiseless_reconstruction(self, rng):
        x, _, _ = noiseless_series(rng, (6, 5, 4), (2, 2, 2), 30)
        stages = estimate_loadings(x, (2, 2, 2), np.inf, 2)
        f_hat = estimate_factors(x, stages[-1], np.inf)
        chi = common_component(f_hat, stages[-1])
        rel = np.sum((chi - x) ** 2) / np.sum(x**2)
        assert rel <= 1e-10

    def test_zero_factors_zero_series(self, rng):
        x = rng.standard_normal((10, 4, 3))
        fit = estimate_loadings(x, (2, 1), np.inf, 1)[-1]
        assert not common_component(np.zeros((10, 2, 1)), fit).any()

    def test_rotation_invariance(self, rng):
        x = rng.standard_normal((12, 5, 4))
        fit = estimate_loadings(x, (2, 2), np.inf, 1)[-1]
        f_hat = estimate_factors(x, fit, np.inf)
        chi = common_component(f_hat, fit)
        rotations = []
        for r in fit.ranks:
            q, _ = np.linalg.qr(rng.standard_normal((r, r)))
            rotations.append(q)
        rotated = LoadingSet(
            e=tuple(e @ q for e, q in zip(fit.e, rotations)),
            eigenvalues=fit.eigenvalues,
        )
        f_back = series_multi_mode_product(f_hat, [q.T for q in rotations])
        chi_rot = common_component(f_back, rotated)
        assert np.max(np.abs(chi - chi_rot)) <= 1e-10

    def test_shape_mismatches_rejected(self, rng):
        x = rng.standard_normal((10, 4, 3))
        fit = estimate_loadings(x, (2, 1), np.inf, 0)[-1]
        with pytest.raises(ValueError):
            estimate_factors(rng.standard_normal((10, 5, 3)), fit, np.inf)
        with pytest.raises(ValueError):
            common_component(rng.standard_normal((10, 3, 1)), fit)
