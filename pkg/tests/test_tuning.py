import numpy as np
import pytest

from rtfm.exceptions import DegenerateDataError
from rtfm.tensor_ops import series_multi_mode_product
from rtfm.tuning import CvConfig, cv_tau, fold_slices, tau_grid

pytestmark = pytest.mark.property


class TestTauGrid:
    def test_two_point_grid(self, rng):
        x = rng.standard_normal((5, 4))
        grid = tau_grid(x, 2)
        assert np.isclose(grid[0], np.abs(x).max())
        assert np.isclose(grid[1], np.median(np.abs(x)))

    def test_log_midpoint_with_even_count_median(self):
        x = np.array([[1.0, 10.0, 100.0, 1000.0]])
        grid = tau_grid(x, 3)
        # median by midpoint convention: (10 + 100) / 2 = 55
        assert np.allclose(grid, [1000.0, np.sqrt(1000.0 * 55.0), 55.0])

    def test_strictly_decreasing(self, rng):
        x = rng.standard_normal((6, 5))
        grid = tau_grid(x, 50)
        assert np.all(np.diff(grid) < 0)

    def test_all_zero_rejected(self):
        with pytest.raises(DegenerateDataError):
            tau_grid(np.zeros((4, 3)), 10)

    def test_zero_median_rejected(self):
        x = np.zeros((1, 10))
        x[0, :4] = 5.0
        with pytest.raises(DegenerateDataError):
            tau_grid(x, 10)


class TestFoldSlices:
    def test_contiguous_blocks_with_short_tail(self):
        slices = fold_slices(10, 3)
        assert [(s.start, s.stop) for s in slices] == [(0, 4), (4, 8), (8, 10)]

    def test_exact_partition(self):
        slices = fold_slices(9, 3)
        assert [(s.start, s.stop) for s in slices] == [(0, 3), (3, 6), (6, 9)]

    def test_too_short_rejected(self):
        with pytest.raises(DegenerateDataError):
            fold_slices(3, 3)

    def test_empty_fold_rejected(self):
        # ceil(7/5) = 2 but the fifth block would start at 8 > 7
        with pytest.raises(DegenerateDataError):
            fold_slices(7, 5)


def noiseless(rng, dims, ranks, n):
    loadings = []
    for p, r in zip(dims, ranks):
        q, _ = np.linalg.qr(rng.standard_normal((p, r)))
        loadings.append(np.sqrt(p) * q)
    factors = rng.standard_normal((n,) + tuple(ranks))
    return series_multi_mode_product(factors, loadings)


class TestCvTau:
    def test_score_bounds(self, rng):
        x = rng.standard_normal((18, 5, 4))
        config = CvConfig(grid_size=6, folds=3, iterations=1)
        result = cv_tau(x, (2, 2), config)
        assert result.grid.size == 6
        assert result.scores.size == 6
        assert np.all(result.scores >= 0.0)
        assert np.all(result.scores <= 2 * 3 + 1e-12)  # K * L
        assert result.tau in result.grid

    def test_noiseless_selects_no_truncation(self, rng):
        x = noiseless(rng, (8, 6), (2, 1), 30)
        result = cv_tau(x, (2, 1), CvConfig(grid_size=8, folds=3, iterations=2))
        assert np.isclose(result.tau, np.abs(x).max())
        assert result.scores[0] <= 1e-8

    def test_identical_spaces_zero_contribution(self, rng):
        """A panel whose folds share one exact factor space scores ~0 at the
        top grid level."""
        x = noiseless(rng, (9,), (2,), 24)
        result = cv_tau(x, (2,), CvConfig(grid_size=4, folds=3, iterations=2))
        assert result.scores[0] <= 1e-8

    def test_chosen_tau_is_argmin_with_larger_tie(self, rng):
        x = rng.standard_normal((12, 4, 3))
        result = cv_tau(x, (1, 1), CvConfig(grid_size=5, folds=2, iterations=0))
        best = result.scores.min()
        chosen_idx = int(np.where(result.grid == result.tau)[0][0])
        assert np.isclose(result.scores[chosen_idx], best)
        # no strictly-smaller score at a larger level
        assert not np.any(result.scores[:chosen_idx] <= best - 1e-15)

    def test_degenerate_folds_rejected(self, rng):
        with pytest.raises(DegenerateDataError):
            cv_tau(rng.standard_normal((3, 4, 3)), (1, 1), CvConfig(grid_size=3, folds=3))

    def test_input_never_mutated(self, rng):
        """Regression: the in-place grid walk must act on private copies even
        when the input array is a non-contiguous view."""
        base = rng.standard_normal((12, 3, 4))
        x = np.moveaxis(base, 2, 1)  # non-contiguous view, shape (12, 4, 3)
        snapshot = x.copy()
        cv_tau(x, (1, 1), CvConfig(grid_size=4, folds=2, iterations=1))
        assert np.array_equal(x, snapshot)
