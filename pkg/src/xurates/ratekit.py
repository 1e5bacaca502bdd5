"""Exact natural-number rate arithmetic and quantitative Xu-lemma combinators.

Rates are ordinary naturals, but composing them quickly produces numbers far
beyond anything a simulation could reach.  :class:`ExtNat` keeps the exact
value while it stays below a configurable cap and collapses to an absorbing
``Exceeded`` sentinel afterwards, so "astronomically large" is a value that
can be tested against.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Union

DEFAULT_CAP = 10**9

Witness = Callable[[int], int]
Witness2 = Callable[[int, int], int]


class WitnessRangeError(ValueError):
    """A tabulated witness or schedule was queried outside its table."""


class ExtNat:
    """Natural number with saturation at ``cap``.

    Arithmetic between two values uses the smaller of the two caps.  Any
    intermediate above the cap yields the ``Exceeded`` sentinel, which absorbs
    every further operation and compares greater than all finite values.
    Subtraction is truncated at zero.
    """

    __slots__ = ("_value", "_cap")

    def __init__(self, value: int | None, cap: int = DEFAULT_CAP):
        if cap < 1:
            raise ValueError("cap must be a positive integer")
        if value is not None:
            value = int(value)
            if value < 0:
                raise ValueError(f"ExtNat cannot hold negative value {value}")
            if value > cap:
                value = None
        self._value = value
        self._cap = int(cap)

    @classmethod
    def exceeded(cls, cap: int = DEFAULT_CAP) -> "ExtNat":
        return cls(None, cap)

    @property
    def cap(self) -> int:
        return self._cap

    @property
    def is_exceeded(self) -> bool:
        return self._value is None

    @property
    def value(self) -> int:
        if self._value is None:
            raise OverflowError(f"value exceeded cap {self._cap}")
        return self._value

    def __int__(self) -> int:
        return self.value

    def __index__(self) -> int:
        return self.value

    def _coerce(self, other) -> "ExtNat":
        if isinstance(other, ExtNat):
            return other
        if isinstance(other, int) and not isinstance(other, bool) and other >= 0:
            return ExtNat(other, self._cap)
        return NotImplemented

    def _combine(self, other, op) -> "ExtNat":
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        cap = min(self._cap, other._cap)
        if self._value is None or other._value is None:
            return ExtNat(None, cap)
        return ExtNat(op(self._value, other._value), cap)

    def __add__(self, other):
        if isinstance(other, int) and other < 0:
            return self - (-other)
        return self._combine(other, lambda a, b: a + b)

    __radd__ = __add__

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b)

    __rmul__ = __mul__

    def __sub__(self, other):
        if isinstance(other, int) and other < 0:
            return self + (-other)
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        if other._value is None:
            raise ArithmeticError("cannot subtract an Exceeded value")
        if self._value is None:
            return ExtNat(None, min(self._cap, other._cap))
        return ExtNat(max(self._value - other._value, 0), min(self._cap, other._cap))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def _key(self):
        return (1, 0) if self._value is None else (0, self._value)

    def __eq__(self, other):
        if isinstance(other, ExtNat):
            return self._key() == other._key()
        if isinstance(other, int):
            return self._value is not None and self._value == other
        return NotImplemented

    def __hash__(self):
        return hash(self._key())

    def __lt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._key() < other._key()

    def __le__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._key() <= other._key()

    def __gt__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._key() > other._key()

    def __ge__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self._key() >= other._key()

    def __repr__(self):
        if self._value is None:
            return f"Exceeded({self._cap})"
        return f"ExtNat({self._value})"

    def __str__(self):
        return f"Exceeded({self._cap})" if self._value is None else str(self._value)


Nat = Union[int, ExtNat]


def nat(x: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Lift an int (or pass through an ExtNat) into the saturating domain."""
    if isinstance(x, ExtNat):
        return x
    return ExtNat(x, cap)


def call(fn: Callable[..., int], *args: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Apply a witness to ExtNat arguments; Exceeded arguments absorb."""
    ext = [nat(a, cap) for a in args]
    cap = min([cap] + [a.cap for a in ext])
    if any(a.is_exceeded for a in ext):
        return ExtNat.exceeded(cap)
    out = fn(*(a.value for a in ext))
    if isinstance(out, ExtNat):
        return out if out.cap <= cap else ExtNat(None if out.is_exceeded else out.value, cap)
    return ExtNat(int(out), cap)


def ext_max(*xs: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    return max(nat(x, cap) for x in xs)


def ceil_div(x: Nat, gamma: Fraction | int, cap: int = DEFAULT_CAP) -> ExtNat:
    """``ceil(x / gamma)`` for a positive rational ``gamma``."""
    x = nat(x, cap)
    if x.is_exceeded:
        return x
    g = Fraction(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    return ExtNat(math.ceil(Fraction(x.value) / g), x.cap)


# -- ceil(ln m) by rational interval arithmetic ------------------------------

_E_LO = Fraction(2718281828, 10**9)
_E_HI = Fraction(2718281829, 10**9)


@lru_cache(maxsize=None)
def _e_bounds(level: int) -> tuple[Fraction, Fraction]:
    if level == 0:
        return _E_LO, _E_HI
    terms = 10 * 2**level
    s, fact = Fraction(0), 1
    for j in range(terms + 1):
        if j:
            fact *= j
        s += Fraction(1, fact)
    # e - S_N < 1/(N! N)
    return s, s + Fraction(1, fact * terms)


def _exp_bounds(r: Fraction, level: int) -> tuple[Fraction, Fraction]:
    """Rational enclosure of exp(r) for r >= 0."""
    whole = r.numerator // r.denominator
    frac = r - whole
    e_lo, e_hi = _e_bounds(level)
    lo, hi = e_lo**whole, e_hi**whole
    if frac:
        terms = 12 * 2**level
        s, term = Fraction(1), Fraction(1)
        for j in range(1, terms + 1):
            term = term * frac / j
            s += term
        # frac < 1, tail <= 2 * next term
        tail = 2 * term * frac / (terms + 1)
        lo, hi = lo * s, hi * (s + tail)
    return lo, hi


def _exp_at_least(r: Fraction, m: int) -> bool:
    """Decide exp(r) >= m exactly (no ties occur for m >= 2, r > 0)."""
    for level in range(12):
        lo, hi = _exp_bounds(r, level)
        if lo >= m:
            return True
        if hi < m:
            return False
    raise ArithmeticError(f"could not separate exp({r}) from {m}")


@lru_cache(maxsize=256)
def _ceil_ln_thresholds(c: int) -> tuple[int, int]:
    # floor(E_LO**c) <= e**c <= ceil(E_HI**c)
    lo, hi = _E_LO**c, _E_HI**c
    return lo.numerator // lo.denominator, -((-hi.numerator) // hi.denominator)


def _e_pow_at_least(c: int, m: int) -> bool:
    lo_c, hi_c = _ceil_ln_thresholds(c)
    if m <= lo_c:
        return True
    if m > hi_c:
        return False
    return _exp_at_least(Fraction(c), m)


def ceil_ln(m: int) -> int:
    """Exact ``ceil(ln m)`` for a positive integer ``m``.

    The float logarithm only proposes a candidate ``c``; it is accepted once
    rational bounds on ``e`` certify ``e**(c-1) < m <= e**c``.
    """
    m = int(m)
    if m < 1:
        raise ValueError("ceil_ln needs m >= 1")
    if m == 1:
        return 0
    c = max(1, math.ceil(math.log(m)))
    while not _e_pow_at_least(c, m):
        c += 1
    while c > 1 and _e_pow_at_least(c - 1, m):
        c -= 1
    return c


def ceil_ln_over(m: int, gamma: Fraction | int) -> int:
    """Exact ``ceil(ln(m) / gamma)`` for positive integer ``m``, rational ``gamma``."""
    g = Fraction(gamma)
    if g <= 0:
        raise ValueError("gamma must be positive")
    m = int(m)
    if m < 1:
        raise ValueError("m must be >= 1")
    if m == 1:
        return 0
    if g == 1:
        return ceil_ln(m)
    c = max(1, math.ceil(math.log(m) / float(g)))
    while not _exp_at_least(c * g, m):
        c += 1
    while c > 1 and _exp_at_least((c - 1) * g, m):
        c -= 1
    return c


def ceil_ln_ext(m: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    m = nat(m, cap)
    return m if m.is_exceeded else ExtNat(ceil_ln(m.value), m.cap)


# -- quantitative Xu lemmas ---------------------------------------------------

def sigma0(theta: Witness, psi: Witness, L: int, k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Rate of convergence for ``s_{n+1} <= (1-a_n) s_n + a_n b_n``.

    ``theta`` is a rate of divergence of ``sum a_n``, ``psi`` a limsup-rate of
    ``b_n`` and ``L`` an upper bound on ``s_n``.  Returns
    ``theta(psi(2k+1) + ceil(ln(2L(k+1)))) + 1``.
    """
    if L < 1:
        raise ValueError("L must be a positive natural")
    k = nat(k, cap)
    inner = call(psi, 2 * k + 1, cap=cap) + ceil_ln_ext(2 * L * (k + 1), cap)
    return call(theta, inner, cap=cap) + 1


def sigma0_star(Aprime: Witness2, R: Witness, D: int, k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Product-witness form: ``A'(R(2k+1), 2D(k+1)-1) + 1``."""
    if D < 1:
        raise ValueError("D must be a positive natural")
    k = nat(k, cap)
    return call(Aprime, call(R, 2 * k + 1, cap=cap), 2 * D * (k + 1) - 1, cap=cap) + 1


def xumeta_sigma(theta: Witness, L: int, k: Nat, n: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Finite-window bound ``theta(n + ceil(ln(3L(k+1)))) + 1``."""
    if L < 1:
        raise ValueError("L must be a positive natural")
    k = nat(k, cap)
    return call(theta, nat(n, cap) + ceil_ln_ext(3 * L * (k + 1), cap), cap=cap) + 1


def xumeta_sigma_star(Aprime: Witness2, D: int, k: Nat, n: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Finite-window bound with a product witness: ``A'(n, 3D(k+1)-1) + 1``."""
    if D < 1:
        raise ValueError("D must be a positive natural")
    k = nat(k, cap)
    return call(Aprime, n, 3 * D * (k + 1) - 1, cap=cap) + 1
