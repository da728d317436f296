import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rankglm.errors import DataError
from rankglm.lp import INFEASIBLE, OPTIMAL, simplex
from rankglm.projector import (
    HessianCache,
    default_lambda_s,
    estimate_w,
    solve_dantzig,
    split_blocks,
)
from rankglm.ranklik import Dataset, pairwise_hessian

from conftest import random_data


def neg_def(p, seed):
    """A random symmetric negative-definite matrix, shaped like a Hessian block."""
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((p + 3, p))
    return -(A.T @ A) / (p + 3) - 0.05 * np.eye(p)


def vertex_min_l1(a, B, lam):
    """Minimum L1 norm over the feasible polytope by vertex enumeration.

    The objective is linear on each orthant, so the optimum sits at an
    intersection of p hyperplanes drawn from ``w_k = 0`` and
    ``(B w)_i = a_i +/- lam``.
    """
    p = a.size
    rows = [np.eye(p)[k] for k in range(p)] + [B[i] for i in range(p)] + [B[i] for i in range(p)]
    rhs = [0.0] * p + list(a + lam) + list(a - lam)
    rows, rhs = np.array(rows), np.array(rhs)
    best = math.inf
    for idx in itertools.combinations(range(3 * p), p):
        M = rows[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        w = np.linalg.solve(M, rhs[list(idx)])
        if np.max(np.abs(a - B @ w)) <= lam + 1e-9:
            best = min(best, float(np.abs(w).sum()))
    return best


class TestDefaultLambda:
    def test_table_design(self):
        assert default_lambda_s(100, 200) == pytest.approx(4 * math.sqrt(math.log(20000) / 100), rel=1e-15)
        assert default_lambda_s(100, 200) == pytest.approx(1.2587, abs=1e-4)  # quoted value is truncated

    def test_e_one(self):
        assert default_lambda_s(math.e, 1) == pytest.approx(2.4261, abs=5e-5)

    def test_decreasing_in_n(self):
        for n in (10, 100, 1000):
            assert default_lambda_s(4 * n, 50) < default_lambda_s(n, 50)

    @pytest.mark.parametrize("n,d", [(1, 5), (10, 0)])
    def test_invalid(self, n, d):
        with pytest.raises(DataError):
            default_lambda_s(n, d)


class TestDantzigClosedForms:
    @given(
        a=st.floats(-3, 3),
        b=st.floats(0.05, 3).flatmap(lambda v: st.sampled_from([v, -v])),
        lam=st.floats(0, 2),
    )
    @settings(max_examples=200, deadline=None)
    def test_scalar_interval_projection(self, a, b, lam):
        w, status, _ = solve_dantzig(np.array([a]), np.array([[b]]), lam)
        lo, hi = sorted(((a - lam) / b, (a + lam) / b))
        expected = 0.0 if lo <= 0 <= hi else (lo if lo > 0 else hi)
        assert status == OPTIMAL
        assert abs(w[0] - expected) <= 1e-10 * max(1.0, abs(expected))

    @pytest.mark.parametrize("p", [1, 2, 4, 8, 15])
    def test_zero_lambda_is_dense_solve(self, p):
        B = neg_def(p, seed=p)
        a = np.random.default_rng(100 + p).standard_normal(p)
        w, status, _ = solve_dantzig(a, B, 0.0)
        assert status == OPTIMAL
        np.testing.assert_allclose(w, np.linalg.solve(B, a), atol=1e-8)

    def test_zero_feasibility_law(self):
        B = neg_def(5, seed=0)
        a = np.array([0.3, -0.7, 0.1, 0.0, 0.69])
        for lam in (0.7, 0.71, 5.0):
            w, status, nit = solve_dantzig(a, B, lam)
            assert status == OPTIMAL and nit == 0
            assert np.all(w == 0.0)

    def test_negative_lambda_infeasible(self):
        w, status, _ = solve_dantzig(np.ones(2), -np.eye(2), -0.1)
        assert status == INFEASIBLE


class TestDantzigMinimality:
    @given(p=st.integers(1, 4), seed=st.integers(0, 10_000), frac=st.floats(0.0, 0.95))
    @settings(max_examples=60, deadline=None)
    def test_matches_vertex_enumeration(self, p, seed, frac):
        B = neg_def(p, seed)
        a = np.random.default_rng(seed + 1).standard_normal(p)
        lam = frac * float(np.max(np.abs(a)))
        w, status, _ = solve_dantzig(a, B, lam)
        assert status == OPTIMAL
        assert np.max(np.abs(a - B @ w)) <= lam + 1e-8
        assert np.abs(w).sum() <= vertex_min_l1(a, B, lam) + 1e-6

    def test_six_dimensional(self):
        B = neg_def(6, seed=42)
        a = np.random.default_rng(7).standard_normal(6)
        lam = 0.3 * float(np.max(np.abs(a)))
        w, status, _ = solve_dantzig(a, B, lam)
        assert status == OPTIMAL
        assert np.abs(w).sum() <= vertex_min_l1(a, B, lam) + 1e-6

    def test_monotone_in_lambda(self):
        B = neg_def(8, seed=5)
        a = np.random.default_rng(9).standard_normal(8)
        grid = np.linspace(0, np.max(np.abs(a)) * 1.1, 25)
        norms = [np.abs(solve_dantzig(a, B, lam)[0]).sum() for lam in grid]
        for lo, hi in zip(norms, norms[1:]):
            assert hi <= lo + 1e-9


class TestEstimateW:
    def test_feasibility_recomputed(self):
        data = random_data(30, 6, seed=1, beta=[1, 0.5, 0, 0, 0, 0])
        beta = np.array([0.8, 0.4, 0.0, 0.0, 0.1, 0.0])
        H = pairwise_hessian(data, beta)
        for j in range(data.d):
            a, B = split_blocks(H, j)
            for lam in (0.0, 0.01, 0.05):
                fit = estimate_w(data, beta, j, lam)
                assert fit.solver_status == OPTIMAL
                assert fit.feasibility_gap == float(np.max(np.abs(a - B.T @ fit.w)))
                assert fit.feasibility_gap <= lam + 1e-8
                assert np.all(np.isfinite(fit.w))

    def test_large_lambda_gives_zero(self):
        data = random_data(20, 4, seed=2)
        fit = estimate_w(data, np.zeros(4), 1, 10.0)
        assert fit.w.shape == (3,) and np.all(fit.w == 0.0)
        assert fit.solver_status == OPTIMAL

    def test_default_lambda(self):
        data = random_data(20, 4, seed=2)
        assert estimate_w(data, np.zeros(4), 0).lambda_s == default_lambda_s(20, 4)

    def test_split_blocks_layout(self):
        H = np.arange(16.0).reshape(4, 4)
        a, B = split_blocks(H, 2)
        np.testing.assert_array_equal(a, [8.0, 9.0, 11.0])
        np.testing.assert_array_equal(B, H[np.ix_([0, 1, 3], [0, 1, 3])])

    def test_cache_reused(self):
        data = random_data(15, 3, seed=4)
        cache = HessianCache(data, np.zeros(3))
        H = cache.H
        assert cache.H is H
        for j in range(3):
            estimate_w(data, np.zeros(3), j, 0.0, cache)
        assert cache.H is H

    def test_tied_response_zero_hessian(self):
        X = np.random.default_rng(0).standard_normal((6, 3))
        data = Dataset(np.ones(6), X)
        fit = estimate_w(data, np.zeros(3), 0, 0.1)
        assert fit.solver_status == OPTIMAL and np.all(fit.w == 0.0)

    @pytest.mark.parametrize("j", [-1, 3])
    def test_bad_index(self, j):
        data = random_data(10, 3)
        with pytest.raises(DataError):
            estimate_w(data, np.zeros(3), j, 0.1)

    def test_needs_two_columns(self):
        data = random_data(10, 1)
        with pytest.raises(DataError):
            estimate_w(data, np.zeros(1), 0, 0.1)


class TestSimplex:
    def test_textbook_lp(self):
        # max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
        res = simplex(np.array([-3.0, -5.0]), np.array([[1.0, 0], [0, 2], [3, 2]]), np.array([4.0, 12, 18]))
        assert res.status == OPTIMAL
        np.testing.assert_allclose(res.x, [2.0, 6.0], atol=1e-12)

    def test_negative_rhs_phase_one(self):
        # min x + y  s.t. x + y >= 2, x <= 3
        res = simplex(np.array([1.0, 1.0]), np.array([[-1.0, -1.0], [1.0, 0.0]]), np.array([-2.0, 3.0]))
        assert res.status == OPTIMAL
        assert res.x.sum() == pytest.approx(2.0, abs=1e-12)

    def test_infeasible(self):
        res = simplex(np.array([1.0]), np.array([[1.0], [-1.0]]), np.array([1.0, -2.0]))
        assert res.status == INFEASIBLE
