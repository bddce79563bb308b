import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtfm.exceptions import DegenerateDataError
from rtfm.ranks import RankConfig, default_r_max, estimate_ranks, ratio_select
from rtfm.tensor_ops import series_multi_mode_product

pytestmark = pytest.mark.property


def exhaustive_ratio_scan(vals, r_max, rho):
    best_j, best = None, -np.inf
    for j in range(r_max):
        ratio = vals[j] / (vals[j + 1] + rho)
        if ratio > best:
            best, best_j = ratio, j
    return best_j + 1


class TestRatioSelect:
    def test_dominant_gap_example(self):
        vals = [100.0, 90.0, 80.0, 1.0, 0.9, 0.8]
        assert ratio_select(vals, 5, 0.01) == 3

    def test_rmax_one_always_one(self):
        assert ratio_select([5.0, 1.0], 1, 0.1) == 1

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_matches_exhaustive_scan(self, seed):
        r = np.random.default_rng(seed)
        vals = np.sort(r.exponential(1.0, size=12))[::-1]
        r_max = int(r.integers(1, 11))
        rho = float(r.uniform(0.001, 1.0))
        assert ratio_select(vals, r_max, rho) == exhaustive_ratio_scan(vals, r_max, rho)

    def test_too_few_eigenvalues(self):
        with pytest.raises(ValueError):
            ratio_select([3.0, 2.0], 2, 0.1)

    def test_bad_rho(self):
        with pytest.raises(ValueError):
            ratio_select([3.0, 2.0, 1.0], 2, 0.0)

    def test_tie_breaks_to_smallest_index(self):
        # equal ratios at j=1 and j=2: 4/2 = 2/1 with rho absorbed into values
        vals = np.array([4.0, 2.0, 1.0, 0.5])
        rho = 1e-12
        assert ratio_select(vals, 3, rho) == 1


def make_noiseless(rng, dims, ranks, n=60):
    loadings = []
    for p, r in zip(dims, ranks):
        q, _ = np.linalg.qr(rng.standard_normal((p, r)))
        loadings.append(np.sqrt(p) * q)
    factors = rng.standard_normal((n,) + tuple(ranks))
    return series_multi_mode_product(factors, loadings)


class TestEstimateRanks:
    def test_noiseless_exact_ranks(self, rng):
        x = make_noiseless(rng, (12, 10, 8), (2, 3, 1))
        result = estimate_ranks(x, np.inf)
        assert result.ranks == (2, 3, 1)
        assert result.converged
        # correct from the first pass on
        assert result.trace[1] == (2, 3, 1)
        assert result.trace[-1] == result.ranks

    def test_forced_cap_one(self, rng):
        x = make_noiseless(rng, (10, 8), (2, 2)) + 0.1 * rng.standard_normal((60, 10, 8))
        result = estimate_ranks(x, np.inf, RankConfig(r_max=(1, 1)))
        assert result.ranks == (1, 1)
        assert result.trace[1] == (1, 1)

    def test_ranks_within_caps(self, rng):
        x = rng.standard_normal((40, 9, 7))
        result = estimate_ranks(x, 1.5)
        caps = (default_r_max(9), default_r_max(7))
        assert all(1 <= r <= c for r, c in zip(result.ranks, caps))

    def test_scale_free_under_reciprocal_rho(self, rng):
        x = make_noiseless(rng, (10, 8), (2, 1)) + 0.3 * rng.standard_normal((60, 10, 8))
        c = 41.7
        a = estimate_ranks(x, 2.0)
        b = estimate_ranks(c * x, c * 2.0)
        assert a.ranks == b.ranks
        assert a.trace == b.trace

    def test_degenerate_spectrum_raises(self):
        with pytest.raises(DegenerateDataError):
            estimate_ranks(np.zeros((10, 6, 4)), np.inf)

    def test_default_r_max_formula(self):
        assert default_r_max(50) == 20
        assert default_r_max(10) == 5
        assert default_r_max(3) == 1
        with pytest.raises(ValueError):
            default_r_max(1)

    def test_fixed_rho_honoured(self, rng):
        x = make_noiseless(rng, (10, 8), (2, 2)) + 0.05 * rng.standard_normal((60, 10, 8))
        result = estimate_ranks(x, np.inf, RankConfig(rho=1e-6))
        assert result.ranks == (2, 2)
