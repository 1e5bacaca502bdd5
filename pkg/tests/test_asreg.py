from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xurates.asreg import (AsRegRates, InstanceBounds, N4, Psi, Sigma, Sigma_hat, Sigma_hat_star,
                           Sigma_star, Variant, compute_K, compute_Q, example_closed_forms, psi_rate)
from xurates.ratekit import ExtNat
from xurates.sched import example_schedule, inverse_sqrt_schedule


def bounds(K=1, Q=0, bA=1, bU=1, bP=1, gamma=1, l=1):
    return InstanceBounds(K=K, Q=Q, bA=bA, bU=bU, bP=bP, gamma=Fraction(gamma), l=l)


@pytest.mark.parametrize("sigma1, bA, expected", [(lambda k: k, 1, 0), (lambda k: 2 * k, 3, 3),
                                                  (lambda k: 5 * k, 1, 0)])
def test_compute_Q(sigma1, bA, expected):
    assert compute_Q(sigma1, bA) == expected


def test_compute_K_examples():
    A = np.diag([2.0, 1.0])
    assert compute_K([0, 0], [0, 0], [4, 1], A, 1) == 5
    assert compute_K([1, 1], [1, 1], A @ [1, 1], A, 1) == 1


@given(st.floats(0, 50), st.floats(0, 50))
def test_compute_K_monotone_in_u(a, b):
    small, big = sorted((a, b))
    A = np.eye(2)
    assert compute_K([0, 0], [0, 0], [small, 0], A, 1) <= compute_K([0, 0], [0, 0], [big, 0], A, 1)


@pytest.mark.parametrize("K, expected", [(2, 2), (1, 0)])
def test_Psi_examples(K, expected):
    assert Psi(bounds(K=K), lambda k: k, 0) == expected


def test_psi_examples():
    s = example_schedule(1, 1)
    assert psi_rate(bounds(), s.sigma3, 3) == 6
    assert psi_rate(bounds(), s.sigma3, 0) == 0
    assert all(psi_rate(bounds(), s.sigma3, k) == 2 * k for k in range(50))


def test_Sigma_tabulated_example():
    assert Sigma(bounds(), lambda m: 3 * m, lambda m: ExtNat(2), 0) == 17


def test_Sigma_exceeded():
    assert Sigma(bounds(), lambda m: 3 * m, lambda m: ExtNat.exceeded(), 0).is_exceeded
    assert Sigma(bounds(), lambda m: 3 * m, lambda m: ExtNat(2), ExtNat.exceeded()).is_exceeded


@given(st.integers(0, 30), st.integers(0, 5), st.integers(1, 4))
def test_Sigma_at_least_Q_plus_one(k, Q, K):
    # sigma2(m) = m - 1 is the smallest witness allowed by alpha_n <= 1
    b = bounds(K=K, Q=Q)
    assert Sigma(b, lambda m: max(m - 1, 0), lambda m: ExtNat(0), k) >= Q + 1


def test_Sigma_star_example():
    s = example_schedule(1, 1)
    psi = lambda m: psi_rate(bounds(), s.sigma3, m)  # noqa: E731
    assert s.sigma2star(2, 3) == 7
    assert Sigma_star(bounds(), s.sigma2star, psi, 0) == 6


def test_Sigma_star_floor():
    assert Sigma_star(bounds(Q=7), lambda m, k: 0, lambda m: ExtNat(0), 0) == 8


def test_Sigma_hat_star_example():
    s = example_schedule(1, 2)
    b = bounds(K=2, l=2)
    sigma4 = lambda m: 2 * m  # noqa: E731
    assert N4(b, sigma4, 0) == 14
    assert Sigma_hat_star(b, s.sigma2star, sigma4, 0) == 119


@given(st.integers(0, 200))
def test_Sigma_hat_star_above_N4(k):
    s = example_schedule(1, 2)
    b = bounds(K=2, l=2)
    assert Sigma_hat_star(b, s.sigma2star, s.sigma4, k) >= N4(b, s.sigma4, k) + 1


def test_Sigma_hat_uses_sigma2():
    s = inverse_sqrt_schedule(1, 1)
    v = Sigma_hat(bounds(), s.sigma2, s.sigma4, 0)
    n4 = N4(bounds(), s.sigma4, 0).value
    # sigma2(N4 + l + 1 + ceil(ln 4 / gamma)) with ceil(ln 4) = 2
    assert v == s.sigma2(n4 + 1 + 1 + 2)


def test_missing_witness():
    with pytest.raises(ValueError, match="sigma2"):
        AsRegRates(bounds(), example_schedule(1, 1), Variant.C3_C2)
    with pytest.raises(ValueError):
        psi_rate(bounds(), None, 0)


def test_Phi_spot_values():
    r = AsRegRates(bounds(), example_schedule(1, 1), Variant.C3_C2STAR)
    assert r.Phi(0) == 46
    assert AsRegRates(bounds(), example_schedule(1, 1), Variant.C4_C2STAR).Phi(0) == 55
    assert example_closed_forms(1, 1, 1, 1, 1, 0) == (ExtNat(46), ExtNat(55))


GRID = [(g, l, K, bA) for g in (Fraction(1), Fraction(1, 2), Fraction(2, 5)) for l in (1, 2, 3)
        for K in (1, 3) for bA in (1, 2, 4)]


@pytest.mark.parametrize("g, l, K, bA", GRID)
def test_closed_forms_agree(g, l, K, bA):
    s = example_schedule(g, l)
    J = s.params["J"]
    b = InstanceBounds(K=K, Q=compute_Q(s.sigma1, bA), bA=bA, bU=1, bP=1, gamma=g, l=l)
    star = AsRegRates(b, s, Variant.C3_C2STAR)
    hat = AsRegRates(b, s, Variant.C4_C2STAR)
    for k in range(0, 101, 7):
        cf, cft = example_closed_forms(J, l, K, bA, g, k)
        assert star.Phi(k) == cf
        assert hat.Phi(k) == cft


def test_closed_form_rejects_wrong_J():
    with pytest.raises(ValueError):
        example_closed_forms(2, 1, 1, 1, 1, 0)


def test_quadratic_growth():
    k = 20000
    a, _ = example_closed_forms(1, 1, 1, 1, 1, k, cap=10**30)
    b, _ = example_closed_forms(1, 1, 1, 1, 1, 2 * k, cap=10**30)
    assert abs(b.value / a.value - 4) < 1e-3


@pytest.mark.parametrize("variant", list(Variant))
def test_all_variants_monotone_and_above_Q(variant):
    s = inverse_sqrt_schedule(Fraction(1, 2), 2)
    b = InstanceBounds(K=2, Q=compute_Q(s.sigma1, 2), bA=2, bU=1, bP=1, gamma=Fraction(1, 2), l=2)
    r = AsRegRates(b, s, variant, cap=10**30)
    vals = [r.Phi(k) for k in range(15)]
    assert all(v >= b.Q for v in vals)
    assert all(x <= y for x, y in zip(vals, vals[1:]))
    sig = [r.Sigma(k) for k in range(15)]
    assert all(x <= y for x, y in zip(sig, sig[1:]))


def test_phi_tilde():
    r = AsRegRates(bounds(), example_schedule(1, 1), Variant.C3_C2STAR)
    assert all(r.phi_tilde(k) == r.Phi(k) for k in range(10))
    r2 = AsRegRates(bounds(l=2), example_schedule(1, 2), Variant.C3_C2STAR, tau=lambda k: 2 * k)
    assert r2.phi_tilde(3) == r2.Phi(6)
    r3 = AsRegRates(bounds(l=2), example_schedule(1, 2), Variant.C3_C2STAR)
    with pytest.raises(ValueError):
        r3.phi_tilde(1)


def test_saturation():
    r = AsRegRates(bounds(K=1000), example_schedule(1, 1), Variant.C3_C2STAR)
    assert r.Phi(10**4).is_exceeded
    assert r.Phi(ExtNat.exceeded()).is_exceeded


@pytest.mark.parametrize("text, v", [("C3+C2", Variant.C3_C2), ("C3+C2*", Variant.C3_C2STAR),
                                     ("C4+C2", Variant.C4_C2), ("c4_c2star", Variant.C4_C2STAR)])
def test_variant_parse(text, v):
    assert Variant.parse(text) is v


def test_bounds_validation():
    with pytest.raises(ValueError):
        bounds(K=0)
    with pytest.raises(ValueError):
        bounds(gamma=2)
    b = bounds(K=3, bP=2)
    assert b.K_tilde == 5 and bounds(gamma=Fraction(2, 5)).J == 3
