from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from _instances import random_spd
from xurates.hilbert import (DimensionError, NotStronglyPositive, SpdOperator, apply_A, as_point,
                             certify_bounds, check_contraction_bound, inner, norm, power_norm)

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


@pytest.mark.parametrize("x, y, expected", [((1, 0), (0, 1), 0.0), ((1, 2), (3, 4), 11.0)])
def test_inner_examples(x, y, expected):
    assert inner(x, y) == expected


def test_inner_dimension_mismatch():
    with pytest.raises(DimensionError):
        inner([1, 2], [1, 2, 3])


@given(arrays(np.float64, 4, elements=finite))
def test_inner_self_is_square_norm(x):
    assert inner(x, x) >= 0
    assert abs(inner(x, x) - norm(x) ** 2) <= 1e-9 * max(1.0, inner(x, x))


@pytest.mark.parametrize("A, x, expected", [
    (np.diag([2.0, 1.0]), (1, 1), (2, 1)),
    (np.eye(2), (3.5, -1), (3.5, -1)),
    (np.diag([2.0, 1.0]), (0, 0), (0, 0)),
])
def test_apply_A_examples(A, x, expected):
    np.testing.assert_array_equal(apply_A(SpdOperator.from_matrix(A), x), expected)


def test_apply_A_dimension_mismatch():
    with pytest.raises(DimensionError):
        apply_A(SpdOperator.from_matrix(np.eye(2)), [1, 2, 3])


def test_as_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        as_point([1.0, np.nan])


class TestCertifyBounds:
    def test_diag(self):
        assert certify_bounds(np.diag([2.0, 1.0])) == (Fraction(1), 2.0, 2)

    def test_identity_3d(self):
        g, upper, bA = certify_bounds(np.eye(3))
        assert g == 1 and upper == 1.0 and bA == 1

    def test_negative_gershgorin_rejected(self):
        with pytest.raises(NotStronglyPositive):
            certify_bounds([[1.0, 2.0], [2.0, 1.0]])

    def test_override_rescues_positive_definite(self):
        # Gershgorin gives 1 - 1.2 < 0 but the matrix is positive definite
        m = [[1.0, 1.2, 0.0], [1.2, 3.0, 0.0], [0.0, 0.0, 1.0]]
        with pytest.raises(NotStronglyPositive):
            certify_bounds(m)
        lam = float(np.linalg.eigvalsh(np.array(m)).min())
        g, _, _ = certify_bounds(m, gamma=lam * 0.99)
        assert 0 < g <= lam

    def test_override_above_spectrum_rejected(self):
        with pytest.raises(NotStronglyPositive):
            certify_bounds(np.diag([0.5, 1.5]), gamma=0.9)

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            certify_bounds([[1.0, 0.1], [0.0, 1.0]])

    def test_clipped_to_one(self):
        g, _, _ = certify_bounds(np.diag([5.0, 7.0]))
        assert g == 1

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10**6), st.integers(1, 8))
    def test_quadratic_form_bounds(self, seed, d):
        rng = np.random.default_rng(seed)
        A = SpdOperator.from_matrix(random_spd(rng, d))
        for _ in range(20):
            x = rng.standard_normal(d)
            q = inner(A(x), x)
            xx = inner(x, x)
            assert float(A.gamma) * xx <= q * (1 + 1e-9)
            assert q <= A.norm_upper * xx * (1 + 1e-9)
            y = rng.standard_normal(d)
            assert abs(inner(A(x), y) - inner(x, A(y))) <= 1e-10 * max(1.0, norm(x) * norm(y) * A.norm_upper)


@given(arrays(np.float64, 3, elements=finite), arrays(np.float64, 3, elements=finite))
def test_hilbert_inequality(x, y):
    lhs = norm(x + y) ** 2
    rhs = norm(x) ** 2 + 2 * inner(y, x + y)
    assert lhs <= rhs + 1e-10 * max(1.0, abs(rhs), lhs)


class TestContraction:
    def test_diag_half(self):
        ok, est = check_contraction_bound(SpdOperator.from_matrix(np.diag([2.0, 1.0])), 0.5)
        assert ok and abs(est - 0.5) < 1e-9

    def test_identity_full_step(self):
        ok, est = check_contraction_bound(SpdOperator.from_matrix(np.eye(2)), 1.0)
        assert ok and est <= 1e-12

    def test_alpha_out_of_range(self):
        A = SpdOperator.from_matrix(np.diag([2.0, 1.0]))
        with pytest.raises(ValueError):
            check_contraction_bound(A, 0.6)
        with pytest.raises(ValueError):
            check_contraction_bound(A, -0.1)

    @pytest.mark.parametrize("seed", range(10))
    def test_random_spd_full_step(self, seed):
        rng = np.random.default_rng(seed)
        A = SpdOperator.from_matrix(random_spd(rng, 5))
        ok, est = check_contraction_bound(A, 1.0 / A.norm_upper)
        assert ok, est


def test_power_norm_matches_svd():
    rng = np.random.default_rng(1)
    M = rng.standard_normal((6, 6))
    assert abs(power_norm(M) - np.linalg.norm(M, 2)) <= 1e-8 * np.linalg.norm(M, 2)


def test_scaled_operator():
    A = SpdOperator.from_matrix(np.diag([2.0, 1.0]))
    B = A.scaled(0.5)
    np.testing.assert_allclose(B.matrix, np.diag([1.0, 0.5]))
    assert B.norm_upper <= 1.0
