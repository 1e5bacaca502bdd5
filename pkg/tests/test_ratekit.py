import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xurates.ratekit import (DEFAULT_CAP, ExtNat, WitnessRangeError, call, ceil_div, ceil_ln,
                             ceil_ln_over, ext_max, nat, sigma0, sigma0_star, xumeta_sigma,
                             xumeta_sigma_star)

naturals = st.integers(min_value=0, max_value=2 * 10**9)


def _oracle_ceil_ln(m: int) -> int:
    # independent: smallest c with e^c >= m, e bracketed by rationals
    lo = Fraction(2718281828, 10**9)
    c = 0
    while lo**c < m:
        c += 1
    return c


class TestExtNat:
    def test_saturates_at_cap(self):
        assert ExtNat(10, cap=10).value == 10
        assert ExtNat(11, cap=10).is_exceeded

    def test_exceeded_absorbs(self):
        e = ExtNat.exceeded()
        assert (e + 1).is_exceeded
        assert (e * 0).is_exceeded
        assert (3 * e).is_exceeded
        assert (e - 5).is_exceeded

    def test_subtraction_truncates(self):
        assert ExtNat(3) - 5 == 0
        assert ExtNat(3) + (-5) == 0

    def test_subtracting_exceeded_rejected(self):
        with pytest.raises(ArithmeticError):
            ExtNat(3) - ExtNat.exceeded()

    def test_value_of_exceeded_raises(self):
        with pytest.raises(OverflowError):
            ExtNat.exceeded().value

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            ExtNat(-1)

    def test_mixed_caps_use_smaller(self):
        assert (ExtNat(6, cap=10) + ExtNat(6, cap=100)).is_exceeded
        assert (ExtNat(6, cap=100) + ExtNat(6, cap=100)).value == 12

    def test_str_and_repr(self):
        assert str(ExtNat(5)) == "5"
        assert str(ExtNat.exceeded()) == f"Exceeded({DEFAULT_CAP})"
        assert repr(ExtNat(5)) == "ExtNat(5)"

    def test_exceeded_is_largest(self):
        assert ExtNat.exceeded() > ExtNat(DEFAULT_CAP)
        assert ext_max(1, ExtNat.exceeded(), 3).is_exceeded
        assert ext_max(1, 7, 3) == 7

    @given(naturals, naturals)
    def test_addition_matches_int(self, a, b):
        r = ExtNat(a) + ExtNat(b)
        if a + b <= DEFAULT_CAP and a <= DEFAULT_CAP and b <= DEFAULT_CAP:
            assert r.value == a + b
        else:
            assert r.is_exceeded

    @given(naturals, naturals, naturals)
    def test_monotone_operations(self, a, b, c):
        # x <= y implies x op z <= y op z
        x, y = sorted((a, b))
        for op in (lambda s, t: s + t, lambda s, t: s * t):
            assert op(nat(x), nat(c)) <= op(nat(y), nat(c))

    @given(naturals, naturals)
    def test_order_matches_int(self, a, b):
        x, y = nat(a), nat(b)
        if not x.is_exceeded and not y.is_exceeded:
            assert (x < y) == (a < b) and (x == y) == (a == b)


class TestCeilLn:
    @pytest.mark.parametrize("m, expected", [(1, 0), (2, 1), (3, 2), (4, 2), (12, 3), (41472, 11)])
    def test_examples(self, m, expected):
        assert ceil_ln(m) == expected

    def test_powers_of_e_neighbourhood(self):
        for c in range(1, 14):
            m = math.floor(math.e**c)
            assert ceil_ln(m) == _oracle_ceil_ln(m)
            assert ceil_ln(m + 1) == _oracle_ceil_ln(m + 1)

    def test_exhaustive_prefix(self):
        # agreement with the interval oracle for every m up to 10^6 (stepwise)
        c, bound = 0, Fraction(1)
        e_lo = Fraction(2718281828, 10**9)
        for m in range(1, 10**6 + 1, 7):
            while bound < m:
                c += 1
                bound *= e_lo
            assert ceil_ln(m) == c

    @given(st.integers(min_value=1, max_value=10**12))
    def test_against_float(self, m):
        f = math.log(m)
        c = ceil_ln(m)
        assert c - 1 < f + 1e-9 and f <= c + 1e-9

    def test_ceil_ln_over(self):
        assert ceil_ln_over(4, 1) == 2
        assert ceil_ln_over(4, Fraction(1, 2)) == math.ceil(math.log(4) / 0.5)


class TestCall:
    def test_exceeded_argument_absorbs(self):
        assert call(lambda k: 2 * k, ExtNat.exceeded()).is_exceeded

    def test_result_clamped(self):
        assert call(lambda k: k * k, 10**5).is_exceeded
        assert call(lambda k: k * k, 10**4).value == 10**8

    def test_ceil_div(self):
        assert ceil_div(7, Fraction(1, 2)).value == 14
        assert ceil_div(7, Fraction(2, 3)).value == 11
        with pytest.raises(ValueError):
            ceil_div(1, 0)

    def test_range_error_is_value_error(self):
        assert issubclass(WitnessRangeError, ValueError)


class TestXuCombinators:
    def test_sigma0_example(self):
        assert sigma0(lambda k: 2 * k, lambda k: k, 1, 0) == 5

    def test_sigma0_at_least_one(self):
        for k in range(20):
            assert sigma0(lambda m: m, lambda m: 0, 1, k) >= 1

    def test_sigma0_recurrence(self):
        # a_n = 1/2, b_n = 1/(n+1), s0 = 1, equality recurrence
        s = [Fraction(1)]
        for n in range(5):
            s.append(Fraction(1, 2) * s[-1] + Fraction(1, 2) * Fraction(1, n + 1))
        assert abs(float(s[5]) - 0.298) < 1e-3
        assert s[5] <= 1

    def test_sigma0_star_example(self):
        Ap = lambda m, k: m * (k + 1) - 1  # noqa: E731
        assert sigma0_star(Ap, lambda k: k, 1, 0) == 2

    def test_sigma0_star_recurrence(self):
        # a_n = r_n = 1/(n+1), s0 = 1
        Ap = lambda m, k: max(m * (k + 1) - 1, 0)  # noqa: E731
        for k in range(21):
            N = sigma0_star(Ap, lambda j: j, 1, k).value
            s = Fraction(1)
            for i in range(N):
                a = Fraction(1, i + 1)
                s = (1 - a) * s + a * Fraction(1, i + 1)
            assert s <= Fraction(1, k + 1)

    def test_xumeta_sigma_example(self):
        assert xumeta_sigma(lambda k: 2 * k, 1, 0, 0) == 5

    def test_xumeta_sigma_star_examples(self):
        Ap = lambda m, k: max(m * (k + 1) - 1, 0)  # noqa: E731
        assert xumeta_sigma_star(Ap, 1, 0, 2) == 6
        assert xumeta_sigma_star(lambda m, k: 0, 1, 0, 0) == 1

    @given(st.integers(0, 50), st.integers(0, 50))
    def test_xumeta_monotone_in_n(self, k, n):
        th = lambda m: 3 * m + 1  # noqa: E731
        assert xumeta_sigma(th, 2, k, n) <= xumeta_sigma(th, 2, k, n + 1)

    @given(st.integers(0, 30), st.integers(0, 5))
    def test_larger_witness_never_decreases(self, k, extra):
        small = sigma0(lambda m: 2 * m, lambda m: m, 2, k)
        big = sigma0(lambda m: 2 * m + extra, lambda m: m + extra, 2, k)
        assert small <= big

    def test_saturation_propagates(self):
        assert sigma0(lambda m: m * 10**9, lambda m: m, 1, 5).is_exceeded
        assert xumeta_sigma(lambda m: m, 1, ExtNat.exceeded(), 0).is_exceeded

    @pytest.mark.parametrize("fn", [
        lambda: sigma0(lambda k: k, lambda k: k, 0, 0),
        lambda: sigma0_star(lambda m, k: m, lambda k: k, 0, 0),
        lambda: xumeta_sigma(lambda k: k, 0, 0, 0),
        lambda: xumeta_sigma_star(lambda m, k: m, 0, 0, 0),
    ])
    def test_bound_must_be_positive(self, fn):
        with pytest.raises(ValueError):
            fn()
