"""Step-size schedules with rate witnesses for the quantitative conditions.

Witness conventions (all functions are monotone naturals):

* ``sigma1``: ``alpha_n <= 1/(k+1)`` for ``n >= sigma1(k)``.
* ``sigma2``: ``sum_{n <= sigma2(k)} alpha_n >= k`` (rate of divergence).
* ``sigma2star``: ``prod_{i=m}^{sigma2star(m,k)} (1 - gamma alpha_i) <= 1/(k+1)``.
* ``sigma3``: ``|alpha_n / alpha_{n+l} - 1| <= 1/(k+1)`` for ``n >= sigma3(k)``.
* ``sigma4``: ``sum_{i=m}^{n} |alpha_{i+l} - alpha_i| <= 1/(k+1)``
  whenever ``n >= m >= sigma4(k) + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .ratekit import Witness, Witness2, WitnessRangeError, ceil_ln


@dataclass(frozen=True)
class Schedule:
    alpha: Callable[[int], float]
    l: int
    sigma1: Witness | None = None
    sigma2: Witness | None = None
    sigma2star: Witness2 | None = None
    sigma3: Witness | None = None
    sigma4: Witness | None = None
    gamma: Fraction | None = None
    alpha_exact: Callable[[int], Fraction] | None = None
    alpha_block: Callable[[int, int], np.ndarray] | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("cycle length l must be >= 1")
        if self.sigma2star is not None and self.gamma is None:
            raise ValueError("a product witness needs the gamma it refers to")

    def alphas(self, start: int, stop: int) -> np.ndarray:
        """``alpha_n`` for ``start <= n < stop`` as float64."""
        if self.alpha_block is not None:
            return self.alpha_block(start, stop)
        return np.array([self.alpha(n) for n in range(start, stop)], dtype=float)

    def has(self, name: str) -> bool:
        return getattr(self, name) is not None


def _ceil_frac(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def example_schedule(gamma, l: int) -> Schedule:
    """``alpha_n = 1/(gamma (n + J))`` with ``J = ceil(1/gamma)``.

    Ships the closed-form witnesses ``sigma1(k) = Jk``,
    ``sigma2star(m, k) = max((m+J-1)(k+1) - J, 0)``,
    ``sigma3(k) = max(l(k+1) - J, 0)`` and
    ``sigma4(k) = max(lJ(k+1) - J - 1, 0)``.  No divergence-rate witness is
    provided: for this schedule it would have to be exponential.
    """
    g = Fraction(gamma) if not isinstance(gamma, float) else Fraction(gamma)
    if not 0 < g <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    J = _ceil_frac(1 / g)
    gf = float(g)

    def alpha(n: int) -> float:
        return 1.0 / (gf * (n + J))

    def alpha_exact(n: int) -> Fraction:
        return 1 / (g * (n + J))

    def alpha_block(start: int, stop: int) -> np.ndarray:
        return 1.0 / (gf * (np.arange(start, stop, dtype=np.float64) + J))

    return Schedule(
        alpha=alpha,
        l=l,
        sigma1=lambda k: J * k,
        sigma2star=lambda m, k: max((m + J - 1) * (k + 1) - J, 0),
        sigma3=lambda k: max(l * (k + 1) - J, 0),
        sigma4=lambda k: max(l * J * (k + 1) - J - 1, 0),
        gamma=g,
        alpha_exact=alpha_exact,
        alpha_block=alpha_block,
        kind="example",
        params={"gamma": g, "l": l, "J": J},
    )


def inverse_sqrt_schedule(gamma, l: int) -> Schedule:
    """``alpha_n = 1/sqrt(n+1)`` with polynomial witnesses for every condition.

    Unlike the harmonic example this schedule has a polynomial divergence
    rate, so all four rate variants stay finite.  Witnesses:

    * ``sigma1(k) = (k+1)^2 - 1``
    * ``sigma2(k) = max(ceil((k+2)^2/4) - 2, 0)`` from
      ``sum_{j=1}^{N+1} j^{-1/2} >= 2 sqrt(N+2) - 2``
    * ``sigma3(k) = max(ceil(l(k+1)/2) - 1, 0)`` from ``sqrt(1+t) <= 1 + t/2``
    * ``sigma4(k) = max(l^2 (k+1)^2 - 2, 0)`` from the telescoping tail
      ``<= l alpha_m``
    * ``sigma2star(m, k) = max(ceil((r + c/(2 gamma))^2) - 2, 0)`` with
      ``r = ceil(sqrt(m+1))`` and ``c = ceil(ln(k+1))``, from
      ``1 - x <= exp(-x)`` and the integral bound on the partial sums.
    """
    g = Fraction(gamma)
    if not 0 < g <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")

    def alpha(n: int) -> float:
        return 1.0 / math.sqrt(n + 1)

    def alpha_block(start: int, stop: int) -> np.ndarray:
        return 1.0 / np.sqrt(np.arange(start, stop, dtype=np.float64) + 1.0)

    def sigma2star(m: int, k: int) -> int:
        r = math.isqrt(m + 1)
        if r * r < m + 1:
            r += 1
        c = ceil_ln(k + 1)
        bound = (r + Fraction(c) / (2 * g)) ** 2
        return max(_ceil_frac(bound) - 2, 0)

    return Schedule(
        alpha=alpha,
        l=l,
        sigma1=lambda k: (k + 1) ** 2 - 1,
        sigma2=lambda k: max(-((-(k + 2) ** 2) // 4) - 2, 0),
        sigma2star=sigma2star,
        sigma3=lambda k: max(-((-l * (k + 1)) // 2) - 1, 0),
        sigma4=lambda k: max(l * l * (k + 1) ** 2 - 2, 0),
        gamma=g,
        alpha_block=alpha_block,
        kind="inverse-sqrt",
        params={"gamma": g, "l": l},
    )


class _Table:
    def __init__(self, name: str, values: Sequence[int]):
        self.name = name
        self.values = [int(v) for v in values]

    def __call__(self, k: int) -> int:
        if not 0 <= k < len(self.values):
            raise WitnessRangeError(f"{self.name}({k}) outside its table of {len(self.values)}")
        return self.values[k]


class _Table2:
    def __init__(self, name: str, rows: Sequence[Sequence[int]]):
        self.name = name
        self.rows = [[int(v) for v in r] for r in rows]

    def __call__(self, m: int, k: int) -> int:
        if not 0 <= m < len(self.rows) or not 0 <= k < len(self.rows[m]):
            raise WitnessRangeError(f"{self.name}({m}, {k}) outside its table")
        return self.rows[m][k]


def tabulated_schedule(alpha: Sequence[float], l: int, gamma=None, **witness_tables) -> Schedule:
    """Schedule given by finite tables; queries beyond a table raise."""
    values = np.array(alpha, dtype=float)
    if np.any(values <= 0) or np.any(values > 1):
        raise ValueError("step sizes must lie in (0, 1]")
    alpha_table = _Table("alpha", [0] * len(values))

    def alpha_fn(n: int) -> float:
        alpha_table(n)  # range check
        return float(values[n])

    def block(start: int, stop: int) -> np.ndarray:
        if start < 0 or stop > len(values):
            raise WitnessRangeError(f"alpha[{start}:{stop}] outside its table of {len(values)}")
        return values[start:stop].copy()

    kw = {}
    for name in ("sigma1", "sigma2", "sigma3", "sigma4"):
        if witness_tables.get(name) is not None:
            kw[name] = _Table(name, witness_tables[name])
    if witness_tables.get("sigma2star") is not None:
        kw["sigma2star"] = _Table2("sigma2star", witness_tables["sigma2star"])
    return Schedule(alpha=alpha_fn, l=l, gamma=None if gamma is None else Fraction(gamma),
                    alpha_block=block, kind="custom", **kw)


# -- validation ---------------------------------------------------------------

@dataclass
class ValidationReport:
    name: str
    checks: int = 0
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def record(self, passed: bool, detail) -> None:
        self.checks += 1
        if not passed:
            self.violations.append(detail)


def _alpha_exact_or_float(s: Schedule, n: int):
    return s.alpha_exact(n) if s.alpha_exact is not None else s.alpha(n)


def _later(start: int, count: int = 8) -> list[int]:
    return [start + 2**j for j in range(count)]


def validate_sigma1(s: Schedule, k_max: int) -> ValidationReport:
    """Check ``alpha_n <= 1/(k+1)`` at ``n = sigma1(k)`` and 8 later indices."""
    rep = ValidationReport("sigma1")
    if s.sigma1 is None:
        raise ValueError("schedule has no sigma1 witness")
    for k in range(k_max + 1):
        n0 = s.sigma1(k)
        for n in [n0] + _later(n0):
            a = _alpha_exact_or_float(s, n)
            bound = Fraction(1, k + 1)
            ok = a <= bound if isinstance(a, Fraction) else a <= float(bound) * (1 + 1e-12)
            rep.record(ok, (k, n, float(a)))
    return rep


def validate_sigma2(s: Schedule, k_max: int) -> ValidationReport:
    """Partial sums reach ``k`` by ``sigma2(k)``; also ``sigma2(k) >= k-1``."""
    rep = ValidationReport("sigma2")
    if s.sigma2 is None:
        raise ValueError("schedule has no sigma2 witness")
    top = s.sigma2(k_max)
    sums = np.cumsum(s.alphas(0, top + 1))
    for k in range(k_max + 1):
        n = s.sigma2(k)
        rep.record(sums[n] >= k - 1e-9 * max(k, 1), (k, n, float(sums[n])))
        rep.record(n >= k - 1, (k, n, "below k-1"))
    return rep


def validate_sigma2star(s: Schedule, pairs: Sequence[tuple[int, int]]) -> ValidationReport:
    """Spot-check the product bound at sampled ``(m, k)``."""
    rep = ValidationReport("sigma2star")
    if s.sigma2star is None:
        raise ValueError("schedule has no sigma2star witness")
    g = float(s.gamma)
    for m, k in pairs:
        n = s.sigma2star(m, k)
        if n < m:
            rep.record(True, (m, k, n, 1.0))
            continue
        prod = float(np.prod(1.0 - g * s.alphas(m, n + 1)))
        rep.record(prod <= (1.0 / (k + 1)) * (1 + 1e-12), (m, k, n, prod))
    return rep


def validate_sigma3(s: Schedule, k_max: int) -> ValidationReport:
    rep = ValidationReport("sigma3")
    if s.sigma3 is None:
        raise ValueError("schedule has no sigma3 witness")
    for k in range(k_max + 1):
        n0 = s.sigma3(k)
        for n in [n0] + _later(n0):
            ratio = abs(s.alpha(n) / s.alpha(n + s.l) - 1.0)
            rep.record(ratio <= (1.0 / (k + 1)) * (1 + 1e-12), (k, n, ratio))
    return rep


def validate_sigma4(s: Schedule, k_max: int, n_tail: int = 20000) -> ValidationReport:
    """Check the tail sums ``sum_{i=m}^{m+n_tail} |alpha_{i+l} - alpha_i|``.

    ``m = sigma4(k) + 1``.  For the example schedule the closed-form bound
    ``l/(gamma(m+J))`` is checked exactly as well.
    """
    rep = ValidationReport("sigma4")
    if s.sigma4 is None:
        raise ValueError("schedule has no sigma4 witness")
    l = s.l
    for k in range(k_max + 1):
        m = s.sigma4(k) + 1
        a = s.alphas(m, m + n_tail + l + 1)
        diffs = np.abs(a[l:] - a[:-l])
        tail = math.fsum(diffs)
        rep.record(tail <= (1.0 / (k + 1)) * (1 + 1e-12), (k, m, tail))
        if s.kind == "example":
            g, J = s.params["gamma"], s.params["J"]
            closed = Fraction(l) / (g * (m + J))
            rep.record(closed <= Fraction(1, k + 1), (k, m, float(closed)))
    return rep


def witness_monotone(fn: Witness, k_max: int) -> bool:
    vals = [fn(k) for k in range(k_max + 2)]
    return all(a <= b for a, b in zip(vals, vals[1:]))
