import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xpmo.numerics import (
    NotPositiveDefiniteError,
    cholesky_decompose,
    finite_difference_gradient,
    log_sum_exp,
    stable_softmax,
)


class TestStableSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(stable_softmax([0.0, 0.0]), [0.5, 0.5], atol=1e-15)

    def test_huge_equal_logits_no_overflow(self):
        out = stable_softmax([1000.0, 1000.0, 1000.0])
        assert np.all(np.isfinite(out))
        np.testing.assert_allclose(out, [1 / 3, 1 / 3, 1 / 3], atol=1e-15)

    def test_one_two_three(self):
        # expected values recomputed with mpmath at 50 digits
        expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219]
        np.testing.assert_allclose(stable_softmax([1.0, 2.0, 3.0]), expected, atol=1e-5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="empty logits"):
            stable_softmax([])

    @given(
        st.lists(st.floats(min_value=-1e4, max_value=1e4), min_size=1, max_size=32),
    )
    @settings(max_examples=200, deadline=None)
    def test_sums_to_one_and_stays_finite(self, logits):
        out = stable_softmax(logits)
        assert np.all(np.isfinite(out))
        # entries can underflow to exactly 0 when the logit gap exceeds ~745
        assert np.all(out >= 0.0)
        assert np.all(out <= 1.0)
        assert abs(out.sum() - 1.0) <= 1e-12
        if max(logits) - min(logits) < 700.0:
            assert np.all(out > 0.0)


class TestLogSumExp:
    def test_single(self):
        assert log_sum_exp([0.0]) == 0.0

    def test_pair_identity_at_500(self):
        assert log_sum_exp([500.0, 500.0]) == pytest.approx(500.0 + np.log(2.0), abs=1e-12)

    def test_one_two_three(self):
        # mpmath: log(e + e^2 + e^3) = 3.40760596444438...
        assert log_sum_exp([1.0, 2.0, 3.0]) == pytest.approx(3.40760596, abs=1e-6)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            log_sum_exp([])

    @given(st.lists(st.floats(min_value=-1e4, max_value=1e4), min_size=1, max_size=16))
    @settings(max_examples=200, deadline=None)
    def test_matches_extended_precision(self, values):
        import mpmath

        with mpmath.workdps(50):
            want = float(mpmath.log(mpmath.fsum(mpmath.exp(v) for v in values)))
        got = log_sum_exp(values)
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_decompose(np.eye(3)), np.eye(3))

    def test_hand_verified_2x2(self):
        lower = cholesky_decompose(np.array([[4.0, 2.0], [2.0, 3.0]]))
        np.testing.assert_allclose(lower, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], atol=1e-15)

    def test_negative_diagonal_rejected(self):
        bad = np.diag([1.0, -1.0, 2.0])
        with pytest.raises(NotPositiveDefiniteError, match="not positive definite"):
            cholesky_decompose(bad)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            cholesky_decompose(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_reconstruction(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(5, 5))
        spd = a @ a.T + 5.0 * np.eye(5)
        lower = cholesky_decompose(spd)
        rel = np.linalg.norm(lower @ lower.T - spd) / np.linalg.norm(spd)
        assert rel <= 1e-8

    @pytest.mark.parametrize("seed", range(20))
    def test_round_trip_from_random_lower(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 7))
        lower = np.tril(rng.normal(size=(n, n)))
        np.fill_diagonal(lower, rng.uniform(0.5, 2.0, size=n))
        recovered = cholesky_decompose(lower @ lower.T)
        np.testing.assert_allclose(recovered, lower, atol=1e-8)


class TestFiniteDifference:
    def test_square(self):
        g = finite_difference_gradient(lambda t: float(t[0] ** 2), np.array([3.0]))
        assert g[0] == pytest.approx(6.0, abs=1e-8)

    def test_constant(self):
        g = finite_difference_gradient(lambda t: 1.25, np.array([0.3, -2.0]))
        np.testing.assert_array_equal(g, [0.0, 0.0])

    def test_cubic_sum(self):
        g = finite_difference_gradient(lambda t: float((t**3).sum()), np.array([1.0, 2.0]))
        np.testing.assert_allclose(g, [3.0, 12.0], atol=1e-6)

    def test_caller_array_untouched(self):
        theta = np.array([1.0, 2.0])
        finite_difference_gradient(lambda t: float(t.sum()), theta)
        np.testing.assert_array_equal(theta, [1.0, 2.0])
