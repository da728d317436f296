import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankglm.errors import DataError
from rankglm.ranklik import (
    ORACLE_MAX_N,
    Dataset,
    hajek_sigma,
    kernel_diagnostics,
    pairwise_gradient,
    pairwise_hessian,
    pairwise_loglik,
    rank_probability_oracle,
    third_order_loglik,
)

from conftest import naive_loglik, random_data

LOG2 = math.log(2.0)


def fd_gradient(f, b, h=1e-6):
    g = np.zeros_like(b)
    for k in range(b.size):
        e = np.zeros_like(b)
        e[k] = h
        g[k] = (f(b + e) - f(b - e)) / (2 * h)
    return g


class TestDataset:
    def test_constant_column_named(self):
        X = np.column_stack([np.arange(4.0), np.ones(4)])
        with pytest.raises(DataError, match="'b'"):
            Dataset(np.arange(4.0), X, columns=("a", "b"))

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            Dataset(np.zeros(3), np.eye(4))

    def test_nan_rejected_in_x(self):
        X = np.array([[0.0], [np.nan], [1.0]])
        with pytest.raises(DataError):
            Dataset(np.zeros(3), X)

    def test_nan_y_only_where_unobserved(self):
        X = np.arange(3.0).reshape(-1, 1)
        Dataset(np.array([0.0, 1.0, np.nan]), X, np.array([1, 1, 0]))
        with pytest.raises(DataError):
            Dataset(np.array([0.0, np.nan, 1.0]), X, np.array([1, 1, 0]))

    def test_delta_must_be_binary(self):
        with pytest.raises(DataError):
            Dataset(np.zeros(3), np.arange(3.0), np.array([1, 0.5, 1]))

    def test_fewer_than_two_observed(self):
        data = Dataset(np.arange(3.0), np.arange(3.0), np.array([1, 0, 0]))
        with pytest.raises(DataError):
            pairwise_loglik(data, [0.0])

    def test_beta_length_checked(self, small):
        with pytest.raises(DataError):
            pairwise_loglik(small, np.zeros(3))


class TestLoglik:
    def test_tied_pair(self):
        data = Dataset(np.zeros(2), np.array([[1.0], [3.0]]))
        assert pairwise_loglik(data, [2.5]) == pytest.approx(-LOG2, abs=1e-15)

    def test_beta_zero_is_minus_log2(self, small):
        assert pairwise_loglik(small, np.zeros(small.d)) == -LOG2

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 150), st.integers(0, 10_000))
    def test_beta_zero_exact_any_n(self, n, seed):
        assert pairwise_loglik(random_data(n, 3, seed=seed), np.zeros(3)) == -LOG2

    def test_hand_value(self):
        data = Dataset(np.array([1.0, 0.0]), np.array([[1.0], [0.0]]))
        assert pairwise_loglik(data, [1.0]) == pytest.approx(-math.log(1 + math.exp(-1)), rel=1e-14)
        assert pairwise_loglik(data, [1.0]) == pytest.approx(-0.3132617, abs=1e-7)

    def test_delta_weighting(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((3, 2))
        y = np.array([0.3, -1.2, 0.8])
        b = np.array([0.4, -0.7])
        data = Dataset(y, X, np.array([1, 1, 0]))
        pair = math.log1p(math.exp(-(y[0] - y[1]) * float(b @ (X[0] - X[1]))))
        assert pairwise_loglik(data, b) == pytest.approx(-pair / 3, rel=1e-14)

    def test_matches_naive_loop(self, small):
        b = np.array([0.5, -0.3, 0.1, 0.2])
        assert pairwise_loglik(small, b) == pytest.approx(naive_loglik(small.y, small.X, b), rel=1e-13)

    def test_matches_naive_loop_with_delta(self):
        data = random_data(9, 3, seed=5, delta=True)
        b = np.array([0.2, 0.9, -0.4])
        ref = naive_loglik(data.y, data.X, b, data.delta)
        assert pairwise_loglik(data, b) == pytest.approx(ref, rel=1e-13)

    def test_no_overflow_at_extreme_beta(self, small):
        val = pairwise_loglik(small, np.full(small.d, 1e4))
        assert math.isfinite(val) and val <= 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-5, 5))
    def test_nonpositive(self, seed, scale):
        data = random_data(6, 3, seed=seed)
        b = scale * np.random.default_rng(seed).standard_normal(3)
        assert pairwise_loglik(data, b) <= 0.0


class TestGradient:
    def test_tied_responses_give_zero(self):
        data = Dataset(np.ones(4), np.random.default_rng(1).standard_normal((4, 3)))
        assert np.array_equal(pairwise_gradient(data, np.ones(3)), np.zeros(3))

    def test_hand_value(self):
        data = Dataset(np.array([1.0, 0.0]), np.array([[2.0, -1.0], [0.0, 0.0]]))
        np.testing.assert_allclose(pairwise_gradient(data, np.zeros(2)), [1.0, -0.5], rtol=0, atol=1e-15)

    def test_finite_differences(self, small):
        b = np.array([0.3, -0.2, 0.5, 0.1])
        g = pairwise_gradient(small, b)
        ref = fd_gradient(lambda v: pairwise_loglik(small, v), b)
        assert np.max(np.abs(g - ref)) / np.max(np.abs(ref)) < 1e-6

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000))
    def test_finite_differences_random(self, seed):
        data = random_data(8, 4, seed=seed, delta=seed % 2 == 1)
        b = np.random.default_rng(seed + 1).standard_normal(4)
        g = pairwise_gradient(data, b)
        ref = fd_gradient(lambda v: pairwise_loglik(data, v), b)
        assert np.max(np.abs(g - ref)) <= 1e-6 * max(np.max(np.abs(ref)), 1e-3)


class TestHessian:
    def test_tied_responses_give_zero(self):
        data = Dataset(np.ones(4), np.random.default_rng(1).standard_normal((4, 3)))
        assert np.array_equal(pairwise_hessian(data, np.ones(3)), np.zeros((3, 3)))

    def test_hand_value(self):
        data = Dataset(np.array([1.0, 0.0]), np.array([[1.0], [0.0]]))
        assert pairwise_hessian(data, [0.0])[0, 0] == pytest.approx(-0.25, abs=1e-15)

    def test_finite_differences_of_gradient(self, small):
        b = np.array([0.3, -0.2, 0.5, 0.1])
        H = pairwise_hessian(small, b)
        h = 1e-6
        ref = np.column_stack([
            (pairwise_gradient(small, b + h * e) - pairwise_gradient(small, b - h * e)) / (2 * h)
            for e in np.eye(4)
        ])
        np.testing.assert_allclose(H, ref, atol=1e-5)

    def test_explicit_pair_sum(self):
        data = random_data(6, 3, seed=9, delta=True)
        b = np.array([0.4, -1.0, 0.3])
        n = data.n
        ref = np.zeros((3, 3))
        for i, j in itertools.combinations(range(n), 2):
            w = data.delta[i] * data.delta[j]
            dy, dx = data.y[i] - data.y[j], data.X[i] - data.X[j]
            r = math.exp(-dy * float(b @ dx))
            ref -= w * r * dy**2 * np.outer(dx, dx) / (1 + r) ** 2
        ref /= n * (n - 1) / 2
        np.testing.assert_allclose(pairwise_hessian(data, b), ref, rtol=1e-12, atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 4.0))
    def test_negative_semidefinite(self, seed, scale):
        data = random_data(10, 5, seed=seed)
        b = scale * np.random.default_rng(seed).standard_normal(5)
        H = pairwise_hessian(data, b)
        assert np.array_equal(H, H.T)
        assert np.linalg.eigvalsh(H).max() <= 1e-8


class TestHajek:
    def test_tied_responses_give_zero(self):
        data = Dataset(np.ones(5), np.random.default_rng(1).standard_normal((5, 2)))
        assert np.array_equal(hajek_sigma(data, np.ones(2)), np.zeros((2, 2)))

    @pytest.mark.parametrize("with_delta", [False, True])
    def test_brute_force(self, with_delta):
        n = 3 if not with_delta else 5
        data = random_data(n, 2, seed=11, delta=with_delta)
        b = np.array([0.7, -0.4])
        w = np.ones(n) if data.delta is None else data.delta.astype(float)
        ref = np.zeros((2, 2))
        for i in range(n):
            g = np.zeros(2)
            for j in range(n):
                if j == i:
                    continue
                dy, dx = data.y[i] - data.y[j], data.X[i] - data.X[j]
                r = math.exp(-dy * float(b @ dx))
                g += w[i] * w[j] * r * dy * dx / (1 + r)
            g /= n - 1
            ref += np.outer(g, g)
        ref /= n
        np.testing.assert_allclose(hajek_sigma(data, b), ref, rtol=1e-12, atol=1e-16)

    def test_delta_all_ones_bit_identical(self, small):
        b = np.array([0.3, -0.2, 0.5, 0.1])
        ones = Dataset(small.y, small.X, np.ones(small.n))
        assert np.array_equal(hajek_sigma(ones, b), hajek_sigma(small, b))
        assert pairwise_loglik(ones, b) == pairwise_loglik(small, b)
        assert np.array_equal(pairwise_gradient(ones, b), pairwise_gradient(small, b))
        assert np.array_equal(pairwise_hessian(ones, b), pairwise_hessian(small, b))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_psd(self, seed):
        data = random_data(12, 4, seed=seed)
        S = hajek_sigma(data, np.random.default_rng(seed).standard_normal(4))
        assert np.array_equal(S, S.T)
        assert np.linalg.eigvalsh(S).min() >= -1e-10


def dyadic_data(seed, n=7, d=3):
    # values on a coarse binary grid keep every difference and product exact
    rng = np.random.default_rng(seed)
    y = rng.integers(-8, 9, n) / 4.0
    X = rng.integers(-8, 9, (n, d)) / 4.0
    X[0], X[1] = 1.0, -1.0  # no constant columns
    b = rng.integers(-4, 5, d) / 8.0
    return y, X, b


class TestInvariances:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10_000), st.integers(-16, 16), st.lists(st.integers(-16, 16), min_size=3, max_size=3))
    def test_location_shift_exact(self, seed, c, v):
        y, X, b = dyadic_data(seed)
        base = Dataset(y, X)
        shifted = Dataset(y + c / 4.0, X + np.array(v) / 4.0)
        assert pairwise_loglik(shifted, b) == pairwise_loglik(base, b)
        assert np.array_equal(pairwise_gradient(shifted, b), pairwise_gradient(base, b))
        assert np.array_equal(pairwise_hessian(shifted, b), pairwise_hessian(base, b))
        assert np.array_equal(hajek_sigma(shifted, b), hajek_sigma(base, b))
        assert third_order_loglik(shifted, b) == third_order_loglik(base, b)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_row_permutation(self, seed):
        data = random_data(9, 3, seed=seed, delta=True)
        perm = np.random.default_rng(seed).permutation(data.n)
        other = Dataset(data.y[perm], data.X[perm], data.delta[perm])
        b = np.array([0.5, -0.2, 0.8])
        assert pairwise_loglik(other, b) == pytest.approx(pairwise_loglik(data, b), rel=1e-13)
        np.testing.assert_allclose(pairwise_gradient(other, b), pairwise_gradient(data, b), rtol=1e-12, atol=1e-15)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-1e6, 1e6, allow_nan=False))
    def test_unobserved_responses_never_read(self, seed, junk):
        data = random_data(9, 3, seed=seed, delta=True)
        y2 = data.y.copy()
        y2[data.delta == 0] = junk
        poisoned = Dataset(y2, data.X, data.delta)
        nan_y = data.y.copy()
        nan_y[data.delta == 0] = np.nan
        nan_data = Dataset(nan_y, data.X, data.delta)
        b = np.array([0.5, -0.2, 0.8])
        for other in (poisoned, nan_data):
            assert pairwise_loglik(other, b) == pairwise_loglik(data, b)
            assert np.array_equal(pairwise_gradient(other, b), pairwise_gradient(data, b))
            assert np.array_equal(pairwise_hessian(other, b), pairwise_hessian(data, b))
            assert np.array_equal(hajek_sigma(other, b), hajek_sigma(data, b))


class TestThirdOrder:
    def test_beta_zero(self, small):
        assert third_order_loglik(small, np.zeros(small.d)) == -math.log(6)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(3, 40), st.integers(0, 10_000))
    def test_beta_zero_exact_any_n(self, n, seed):
        assert third_order_loglik(random_data(n, 2, seed=seed), np.zeros(2)) == -math.log(6)

    def test_tied_responses(self):
        data = Dataset(np.full(5, 2.0), np.random.default_rng(0).standard_normal((5, 2)))
        assert third_order_loglik(data, np.array([3.0, -1.0])) == pytest.approx(-math.log(6), abs=1e-14)

    def test_permutation_enumeration(self):
        # log P(observed assignment | order statistics) for one triple
        rng = np.random.default_rng(4)
        y, X, b = rng.standard_normal(3), rng.standard_normal((3, 2)), np.array([0.8, -0.5])
        eta = X @ b
        scores = [sum(y[p[k]] * eta[k] for k in range(3)) for p in itertools.permutations(range(3))]
        ref = scores[0] - math.log(sum(math.exp(s) for s in scores))
        assert third_order_loglik(Dataset(y, X), b) == pytest.approx(ref, rel=1e-13)

    def test_rejects_small_or_incomplete(self):
        with pytest.raises(DataError):
            third_order_loglik(Dataset(np.arange(2.0), np.arange(2.0)), [0.0])
        with pytest.raises(DataError):
            third_order_loglik(Dataset(np.arange(4.0), np.arange(4.0), np.ones(4)), [0.0])


class TestRankOracle:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 10_000))
    def test_sums_to_one(self, n, seed):
        data = random_data(n, 2, seed=seed)
        p = rank_probability_oracle(data, np.random.default_rng(seed).standard_normal(2))
        assert p.shape == (math.factorial(n),)
        assert np.all(p > 0)
        assert abs(p.sum() - 1.0) <= 1e-12

    def test_uniform_at_zero(self):
        p = rank_probability_oracle(random_data(4, 2), np.zeros(2))
        np.testing.assert_allclose(p, 1 / 24, rtol=1e-13)

    def test_pair_closed_form(self):
        y, X, b = np.array([1.3, -0.4]), np.array([[0.5, 1.0], [-0.2, 0.3]]), np.array([0.9, -0.6])
        data = Dataset(y, X)
        R = math.exp(-(y[0] - y[1]) * float(b @ (X[0] - X[1])))
        p = rank_probability_oracle(data, b)
        np.testing.assert_allclose(p, [1 / (1 + R), R / (1 + R)], rtol=1e-14)
        # with n=2 the single pair has C = 1
        assert -math.log(p[0]) == pytest.approx(-pairwise_loglik(data, b), rel=1e-14)

    def test_enumeration_cap(self):
        with pytest.raises(DataError):
            rank_probability_oracle(random_data(ORACLE_MAX_N + 1, 2), np.zeros(2))


class TestDiagnostics:
    def test_hand_value(self):
        data = Dataset(np.array([1.0, 0.0]), np.array([[2.0, -1.0], [0.0, 0.0]]))
        diag = kernel_diagnostics(data)
        assert diag.M == 2.0 and diag.n_pairs_kept == 1 and diag.n_pairs_total == 1

    def test_ties(self):
        assert kernel_diagnostics(Dataset(np.zeros(4), np.arange(4.0))).M == 0.0

    def test_counts_with_delta(self):
        diag = kernel_diagnostics(Dataset(np.arange(3.0), np.arange(3.0), np.array([1, 1, 0])))
        assert (diag.n_pairs_kept, diag.n_pairs_total) == (1, 3)


@pytest.mark.slow
def test_score_mean_zero_at_truth():
    """Monte Carlo mean of the score at the true coefficient is zero."""
    from rankglm.simlab import SimDesign, generate

    design = SimDesign("linear_gaussian", n=50, d=5, mu=0.8, s_true=2, seed=123)
    G = np.array([pairwise_gradient(generate(design, r), design.beta_star) for r in range(2000)])
    se = G.std(axis=0, ddof=1) / math.sqrt(G.shape[0])
    assert np.all(np.abs(G.mean(axis=0)) <= 4 * se)
