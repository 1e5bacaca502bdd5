"""Rates of asymptotic regularity and of the cycle gap for Xu's iteration.

Every rate is an explicit composition of the schedule witnesses with the
instance bounds ``K, Q, bA, gamma, l``.  Values live in :class:`ExtNat`, so a
composition that outgrows the cap reports ``Exceeded`` instead of a number.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .ratekit import (DEFAULT_CAP, ExtNat, Nat, Witness, Witness2, call, ceil_div,
                      ceil_ln, ceil_ln_ext, ceil_ln_over, ext_max, nat)
from .sched import Schedule


class Variant(enum.Enum):
    """Which cycle-gap rate feeds ``Phi``, by the available witnesses."""

    C3_C2 = "C3+C2"
    C3_C2STAR = "C3+C2*"
    C4_C2 = "C4+C2"
    C4_C2STAR = "C4+C2*"

    @property
    def uses_sigma4(self) -> bool:
        return self in (Variant.C4_C2, Variant.C4_C2STAR)

    @property
    def uses_product(self) -> bool:
        return self in (Variant.C3_C2STAR, Variant.C4_C2STAR)

    @property
    def required(self) -> tuple[str, ...]:
        step = "sigma4" if self.uses_sigma4 else "sigma3"
        div = "sigma2star" if self.uses_product else "sigma2"
        return ("sigma1", div, step)

    @classmethod
    def parse(cls, text: str) -> "Variant":
        key = text.strip().upper().replace("+", "_").replace("*", "STAR").replace("-", "_")
        aliases = {"SIGMA": "C3_C2", "SIGMA_STAR": "C3_C2STAR", "SIGMA_HAT": "C4_C2",
                   "SIGMA_HAT_STAR": "C4_C2STAR"}
        key = aliases.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown rate variant {text!r}") from None


@dataclass(frozen=True)
class InstanceBounds:
    """Naturals (and ``gamma``) that all rates depend on.

    ``gamma`` is the exact rational that appears in the step-size conditions
    and in the strong-positivity bound of ``A``.
    """

    K: int
    Q: int
    bA: int
    bU: int
    bP: int
    gamma: Fraction
    l: int

    def __post_init__(self):
        object.__setattr__(self, "gamma", Fraction(self.gamma))
        for name in ("K", "bA", "bU", "bP", "l"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a natural >= 1")
        if self.Q < 0:
            raise ValueError("Q must be a natural")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")

    @property
    def J(self) -> int:
        """``ceil(1/gamma)``."""
        return math.ceil(1 / self.gamma)

    @property
    def K_tilde(self) -> int:
        return self.K + self.bP

    def with_(self, **changes) -> "InstanceBounds":
        return replace(self, **changes)


def compute_Q(sigma1: Witness, bA: int) -> int:
    """``max(sigma1(bA - 1) - 1, 0)``: from this index on, ``alpha_{n+1} <= 1/|A|``."""
    if bA < 1:
        raise ValueError("bA must be >= 1")
    return max(int(sigma1(bA - 1)) - 1, 0)


def compute_K(x_Q, p, u, A_matrix, gamma) -> int:
    """Smallest natural ``>= max(|x_Q - p|, |u - Ap|/gamma)``, at least 1.

    ``x_Q`` is the iterate at index ``Q``; it is supplied by the caller (the
    engine simulates the first ``Q`` steps).
    """
    x_Q, p, u = (np.asarray(v, dtype=float) for v in (x_Q, p, u))
    A = np.asarray(A_matrix, dtype=float)
    r = max(float(np.linalg.norm(x_Q - p)), float(np.linalg.norm(u - A @ p)) / float(Fraction(gamma)))
    return max(1, math.ceil(r))


# -- building blocks ----------------------------------------------------------

def Psi(bounds: InstanceBounds, sigma1: Witness, k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Rate for ``|x_{n+1} - T_{n+1} x_n| <= 1/(k+1)``:
    ``max(sigma1((bA+1)K(k+1) - 1) - 1, 0)``."""
    b = bounds
    arg = (b.bA + 1) * b.K * (nat(k, cap) + 1) - 1
    return call(sigma1, arg, cap=cap) - 1


def psi_rate(bounds: InstanceBounds, sigma3: Witness | None, k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """limsup-rate ``max(sigma3(ceil((bA+1)K/gamma)(k+1) - 1) - Q - 1, 0)``."""
    if sigma3 is None:
        raise ValueError("psi needs the sigma3 witness")
    b = bounds
    c = math.ceil(Fraction((b.bA + 1) * b.K) / b.gamma)
    return call(sigma3, c * (nat(k, cap) + 1) - 1, cap=cap) - (b.Q + 1)


def Sigma(bounds: InstanceBounds, sigma2: Witness | None, psi: Callable[[Nat], ExtNat],
          k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Cycle-gap rate from a divergence witness and the limsup-rate ``psi``.

    ``sigma2(ceil((psi(2k+1) + ceil(ln(4K(k+1))))/gamma) + Q + l + 1) - l``.
    """
    if sigma2 is None:
        raise ValueError("Sigma needs the sigma2 witness")
    b = bounds
    k = nat(k, cap)
    inner = psi(2 * k + 1) + ceil_ln_ext(4 * b.K * (k + 1), cap)
    return call(sigma2, ceil_div(inner, b.gamma, cap) + (b.Q + b.l + 1), cap=cap) - b.l


def Sigma_star(bounds: InstanceBounds, sigma2star: Witness2 | None, psi: Callable[[Nat], ExtNat],
               k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """``max(sigma2star(psi(2k+1), 4K(k+1) - 1) - l, Q + 1)``."""
    if sigma2star is None:
        raise ValueError("Sigma_star needs the sigma2star witness")
    b = bounds
    k = nat(k, cap)
    v = call(sigma2star, psi(2 * k + 1), 4 * b.K * (k + 1) - 1, cap=cap) - b.l
    return ext_max(v, b.Q + 1, cap=cap)


def N4(bounds: InstanceBounds, sigma4: Witness | None, k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """``sigma4(2(bA+1)K(k+1) - 1)``."""
    if sigma4 is None:
        raise ValueError("N4 needs the sigma4 witness")
    b = bounds
    return call(sigma4, 2 * (b.bA + 1) * b.K * (nat(k, cap) + 1) - 1, cap=cap)


def Sigma_hat(bounds: InstanceBounds, sigma2: Witness | None, sigma4: Witness | None,
              k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """``sigma2(N4 + l + 1 + ceil(ln(4K(k+1))/gamma))``."""
    if sigma2 is None:
        raise ValueError("Sigma_hat needs the sigma2 witness")
    b = bounds
    k = nat(k, cap)
    m = 4 * b.K * (k + 1)
    log_term = m if m.is_exceeded else ExtNat(ceil_ln_over(m.value, b.gamma), cap)
    return call(sigma2, N4(bounds, sigma4, k, cap) + (b.l + 1) + log_term, cap=cap)


def Sigma_hat_star(bounds: InstanceBounds, sigma2star: Witness2 | None, sigma4: Witness | None,
                   k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """``sigma2star(N4 + 1, 4K(k+1) - 1)``."""
    if sigma2star is None:
        raise ValueError("Sigma_hat_star needs the sigma2star witness")
    b = bounds
    k = nat(k, cap)
    return call(sigma2star, N4(bounds, sigma4, k, cap) + 1, 4 * b.K * (k + 1) - 1, cap=cap)


# -- assembled rates ----------------------------------------------------------

class AsRegRates:
    """All asymptotic-regularity rates of one instance for one variant.

    Parameters
    ----------
    bounds : InstanceBounds
    schedule : Schedule
        Supplies the witnesses the variant needs.
    variant : Variant
    tau : callable, optional
        The modulus converting composite residuals into individual ones.
        Required by :meth:`phi_tilde` unless ``l == 1``.
    cap : int
        Saturation cap for every value.
    """

    def __init__(self, bounds: InstanceBounds, schedule: Schedule, variant: Variant,
                 tau: Callable[[int], int] | None = None, cap: int = DEFAULT_CAP):
        missing = [w for w in variant.required if getattr(schedule, w) is None]
        if missing:
            raise ValueError(f"variant {variant.value} needs witnesses: {', '.join(missing)}")
        if variant.uses_product and schedule.gamma is not None and schedule.gamma < bounds.gamma:
            raise ValueError("product witness was built for a smaller gamma than the bounds use")
        if schedule.l != bounds.l:
            raise ValueError(f"schedule witnesses refer to l={schedule.l}, instance has l={bounds.l}")
        self.bounds = bounds
        self.schedule = schedule
        self.variant = variant
        self.tau = tau
        self.cap = cap

    def Psi(self, k: Nat) -> ExtNat:
        return Psi(self.bounds, self.schedule.sigma1, k, self.cap)

    def psi(self, k: Nat) -> ExtNat:
        return psi_rate(self.bounds, self.schedule.sigma3, k, self.cap)

    def N4(self, k: Nat) -> ExtNat:
        return N4(self.bounds, self.schedule.sigma4, k, self.cap)

    def Sigma(self, k: Nat) -> ExtNat:
        """The cycle-gap rate of the chosen variant."""
        s, b, v = self.schedule, self.bounds, self.variant
        if v is Variant.C3_C2:
            return Sigma(b, s.sigma2, self.psi, k, self.cap)
        if v is Variant.C3_C2STAR:
            return Sigma_star(b, s.sigma2star, self.psi, k, self.cap)
        if v is Variant.C4_C2:
            return Sigma_hat(b, s.sigma2, s.sigma4, k, self.cap)
        return Sigma_hat_star(b, s.sigma2star, s.sigma4, k, self.cap)

    def Phi(self, k: Nat) -> ExtNat:
        """``max(Sigma((l+1)(k+1) - 1), Psi((l+1)(k+1) - 1))``."""
        kk = (self.bounds.l + 1) * (nat(k, self.cap) + 1) - 1
        if kk.is_exceeded:
            return kk
        return ext_max(self.Sigma(kk), self.Psi(kk), cap=self.cap)

    def tau_of(self, k: int) -> int:
        if self.tau is not None:
            return int(self.tau(k))
        if self.bounds.l == 1:
            return int(k)
        raise ValueError("tau modulus required for families with more than one map")

    def phi_tilde(self, k: Nat) -> ExtNat:
        """``Phi(tau(k))``: individual residuals drop below ``1/(k+1)``."""
        k = nat(k, self.cap)
        if k.is_exceeded:
            return k
        return self.Phi(self.tau_of(k.value))


def Phi(rates: AsRegRates, k: Nat) -> ExtNat:
    return rates.Phi(k)


def phi_tilde(rates: AsRegRates, k: Nat) -> ExtNat:
    return rates.phi_tilde(k)


def example_closed_forms(J: int, l: int, K: int, bA: int, gamma, k: int,
                         cap: int = DEFAULT_CAP) -> tuple[ExtNat, ExtNat]:
    """Closed forms of ``Phi`` for the harmonic schedule ``1/(gamma(n+J))``.

    Returns ``(Phi_star(k), Phi_tilde_star(k))`` for the product-witness
    variants with the ratio condition and the summability condition,
    respectively.
    """
    g = Fraction(gamma)
    if J != math.ceil(1 / g):
        raise ValueError(f"J={J} does not equal ceil(1/gamma)={math.ceil(1 / g)}")
    Q = max(J * (bA - 1) - 1, 0)
    c = math.ceil(Fraction((bA + 1) * K) / g)
    kk = (l + 1) * (k + 1)

    def psi(m: int) -> int:
        return max(l * c * (m + 1) - J - Q - 1, 0)

    t1 = 4 * K * kk * (psi(2 * kk - 1) + J - 1) - J - l
    t2 = J * ((bA + 1) * K * kk - 1) - 1
    phi_star = max(t1, t2, Q + 1)
    phi_tilde_star = 4 * K * (2 * l * J * (bA + 1) * K * kk - 1) * kk - J
    return ExtNat(phi_star, cap), ExtNat(max(phi_tilde_star, 0), cap)
