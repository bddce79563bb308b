import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtfm.exceptions import DegenerateDataError
from rtfm.moments import (
    ModeStacks,
    mode_second_moment,
    projected_second_moment,
    theoretical_tau,
    truncate,
)
from rtfm.tensor_ops import unfold

pytestmark = pytest.mark.property


class TestTruncate:
    def test_definition(self):
        assert truncate(np.array(5.0), 3.0) == 3.0
        assert truncate(np.array(-4.2), 3.0) == -3.0
        assert truncate(np.array(2.5), 3.0) == 2.5

    def test_infinite_level_is_identity(self, rng):
        x = rng.standard_normal((4, 5))
        assert truncate(x, np.inf) is x

    def test_idempotent(self, rng):
        x = 10 * rng.standard_normal((3, 4))
        once = truncate(x, 1.7)
        assert np.array_equal(truncate(once, 1.7), once)

    @given(st.floats(0.1, 3.0), st.floats(0.1, 3.0))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_level(self, t1, t2):
        lo, hi = sorted((t1, t2))
        x = np.random.default_rng(7).standard_normal(64) * 3
        assert np.all(np.abs(truncate(x, lo)) <= np.abs(truncate(x, hi)) + 1e-15)

    def test_bad_level_rejected(self):
        for bad in (0.0, -1.0, np.nan):
            with pytest.raises(ValueError):
                truncate(np.zeros(3), bad)


def quadruple_loop_moment(series, mode, tau):
    """Brute-force oracle: loop over (i, i', column, t)."""
    n = series.shape[0]
    mats = [unfold(np.clip(series[t], -tau, tau), mode) for t in range(n)]
    p_k, p_rest = mats[0].shape
    out = np.zeros((p_k, p_k))
    for t in range(n):
        for i in range(p_k):
            for j in range(p_k):
                for col in range(p_rest):
                    out[i, j] += mats[t][i, col] * mats[t][j, col]
    return out / (n * p_rest)


class TestModeSecondMoment:
    def test_vector_single_observation(self):
        series = np.array([[1.0, 2.0]])
        got = mode_second_moment(series, 0, np.inf)
        assert np.allclose(got, [[1.0, 2.0], [2.0, 4.0]])

    def test_symmetric_psd(self, rng):
        series = rng.standard_normal((6, 4, 3))
        for k in range(2):
            g = mode_second_moment(series, k, 1.0)
            assert np.allclose(g, g.T)
            assert np.all(np.linalg.eigvalsh(g) >= -1e-10)

    def test_matches_quadruple_loop_oracle(self, rng):
        series = 2 * rng.standard_normal((4, 3, 2))
        for k in range(2):
            got = mode_second_moment(series, k, 1.5)
            assert np.allclose(got, quadruple_loop_moment(series, k, 1.5), atol=1e-12)

    def test_invariant_under_time_permutation(self, rng):
        series = rng.standard_normal((8, 3, 2))
        perm = rng.permutation(8)
        for k in range(2):
            a = mode_second_moment(series, k, 1.2)
            b = mode_second_moment(series[perm], k, 1.2)
            assert np.allclose(a, b, atol=1e-12)

    def test_trace_nondecreasing_in_tau(self, rng):
        series = rng.standard_normal((5, 4, 3))
        traces = [np.trace(mode_second_moment(series, 0, t)) for t in (0.5, 1.0, 2.0, np.inf)]
        assert all(a <= b + 1e-12 for a, b in zip(traces, traces[1:]))

    def test_trace_identity_per_mode(self, rng):
        """trace of the untruncated moment equals the average squared
        Frobenius norm of the unfoldings over (n * p_rest)."""
        series = rng.standard_normal((6, 3, 2, 2))
        total_sq = sum(np.sum(series[t] ** 2) for t in range(6))
        for k in range(3):
            p_rest = series[0].size // series.shape[k + 1]
            expected = total_sq / (6 * p_rest)
            assert np.isclose(np.trace(mode_second_moment(series, k, np.inf)), expected)


class TestProjectedSecondMoment:
    def test_full_orthonormal_projection_equals_plain(self, rng):
        series = rng.standard_normal((5, 3, 4))
        q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
        got = projected_second_moment(series, 0, 1.3, q)
        assert np.allclose(got, mode_second_moment(series, 0, 1.3), atol=1e-12)

    def test_zero_projection_gives_zero(self, rng):
        series = rng.standard_normal((5, 3, 4))
        assert not projected_second_moment(series, 0, np.inf, np.zeros((4, 2))).any()

    def test_matches_explicit_projector_oracle(self, rng):
        series = rng.standard_normal((4, 3, 2, 2))
        for k in range(3):
            p_rest = series[0].size // series.shape[k + 1]
            d = rng.standard_normal((p_rest, 2))
            got = projected_second_moment(series, k, 1.1, d)
            n = series.shape[0]
            expected = np.zeros_like(got)
            for t in range(n):
                m = unfold(np.clip(series[t], -1.1, 1.1), k)
                expected += m @ d @ d.T @ m.T
            expected /= n * p_rest
            assert np.allclose(got, expected, atol=1e-12)

    def test_row_count_mismatch(self, rng):
        with pytest.raises(ValueError):
            projected_second_moment(rng.standard_normal((3, 2, 2)), 0, 1.0, np.zeros((3, 1)))


class TestModeStacks:
    def test_inplace_truncation_matches_fresh(self, rng):
        series = rng.standard_normal((6, 3, 4))
        stacks = ModeStacks(series, np.inf)
        stacks.truncate_inplace(0.8)
        fresh = ModeStacks(series, 0.8)
        for k in range(2):
            assert np.array_equal(stacks.stack(k), fresh.stack(k))

    def test_inplace_cannot_relax(self, rng):
        stacks = ModeStacks(rng.standard_normal((4, 2, 2)), 0.5)
        with pytest.raises(ValueError):
            stacks.truncate_inplace(1.0)

    def test_range_grams_add(self, rng):
        series = rng.standard_normal((7, 3, 2))
        stacks = ModeStacks(series, 1.0)
        full = stacks.gram(0)
        split = stacks.gram(0, [(0, 3)]) + stacks.gram(0, [(3, 7)])
        assert np.allclose(full, split, atol=1e-12)

    def test_bad_range_rejected(self, rng):
        stacks = ModeStacks(rng.standard_normal((4, 2, 2)), np.inf)
        with pytest.raises(ValueError):
            stacks.gram(0, [(2, 2)])
        with pytest.raises(ValueError):
            stacks.gram(0, [(0, 9)])


class TestTheoreticalTau:
    def test_plugin_value(self):
        # moment order -> 4 as epsilon -> 1; with n * p_rest = e the level is e^(1/4)
        n = math.e
        got = theoretical_tau(n, (1,), 0, 1.0, 1.0 - 1e-12, "independent")
        assert np.isclose(got, math.e ** 0.25, atol=1e-9)

    def test_monotone_in_n(self):
        vals = [theoretical_tau(n, (10, 10), 0, 1.0, 0.5) for n in (50, 100, 400)]
        assert vals[0] < vals[1] < vals[2]

    def test_both_regimes_match_independent_reevaluation(self):
        n, dims, k, omega, eps = 100, (10, 10, 10), 0, 1.0, 0.5
        p = 1000
        p_rest = 100
        indep = omega * (n * p_rest / math.log(n * p_rest)) ** (1 / (2 + 2 * eps))
        rf = omega * (n * p_rest / math.log(n * p) ** 3) ** (1 / (2 + 2 * eps))
        assert np.isclose(theoretical_tau(n, dims, k, omega, eps, "independent"), indep)
        assert np.isclose(theoretical_tau(n, dims, k, omega, eps, "random_field"), rf)

    def test_invalid_epsilon(self):
        for eps in (0.0, 1.0, -0.5, 2.0):
            with pytest.raises(ValueError):
                theoretical_tau(100, (5,), 0, 1.0, eps)
