"""Rates of metastability for Xu's iteration.

A rate of metastability ``Omega(k, f)`` bounds an index ``N`` such that the
iterates are ``1/(k+1)``-close to each other on the whole window
``[N, f~(N)]``, where ``f~`` is the monotone majorant of the counterfunction
``f``.  ``Omega`` is the ``E``-fold iterate of a step function ``h`` that at
least squares its argument, so for honest parameters it is astronomically
large and surfaces as ``Exceeded``.
"""

from __future__ import annotations

import enum
import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .asreg import AsRegRates, InstanceBounds, Variant
from .ratekit import (DEFAULT_CAP, ExtNat, Nat, Witness, Witness2, call, ceil_div,
                      ceil_ln_ext, ext_max, nat)
from .sched import Schedule

SCAN_LIMIT = 10**7


class Counterfunction:
    """A counterfunction ``f`` together with its monotone majorant ``f~``.

    Parameters
    ----------
    f : callable
        Total function on the naturals.
    kind : {"callable", "constant", "affine", "table"}
        Known shapes get closed-form majorants; arbitrary callables are
        scanned (memoized) up to ``SCAN_LIMIT`` unless ``monotone`` is set.
    monotone : bool
        Declares ``f`` nondecreasing, so that ``f~ = f``.
    """

    def __init__(self, f: Callable[[int], int], kind: str = "callable", monotone: bool = False,
                 params: dict | None = None):
        self.f = f
        self.kind = kind
        self.monotone = monotone
        self.params = params or {}
        self._prefix: list[int] = []
        self._lock = threading.Lock()

    @classmethod
    def constant(cls, c: int) -> "Counterfunction":
        c = _natural(c, "c")
        return cls(lambda n: c, "constant", True, {"c": c})

    @classmethod
    def affine(cls, a: int, b: int) -> "Counterfunction":
        """``f(n) = a n + b`` with natural ``a, b``."""
        a, b = _natural(a, "a"), _natural(b, "b")
        return cls(lambda n: a * n + b, "affine", True, {"a": a, "b": b})

    @classmethod
    def table(cls, values: Sequence[int]) -> "Counterfunction":
        """Tabulated ``f``; beyond the table it keeps its last value."""
        vals = [_natural(v, "table value") for v in values]
        if not vals:
            raise ValueError("table counterfunction needs at least one value")
        last = len(vals) - 1
        cf = cls(lambda n: vals[min(n, last)], "table", False, {"values": vals})
        run, pre = 0, []
        for v in vals:
            run = max(run, v)
            pre.append(run)
        cf._prefix = pre
        return cf

    @classmethod
    def from_config(cls, cfg: dict) -> "Counterfunction":
        kind = cfg.get("kind")
        try:
            if kind == "constant":
                return cls.constant(cfg["c"])
            if kind == "affine":
                return cls.affine(cfg["a"], cfg["b"])
            if kind == "table":
                return cls.table(cfg["values"])
        except KeyError as exc:
            raise ValueError(f"{kind} counterfunction needs key {exc}") from None
        raise ValueError(f"unknown counterfunction kind {kind!r}")

    def __call__(self, n: int) -> int:
        return int(self.f(int(n)))

    def tilde(self, n: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
        """``max_{k <= n} f(k)``; an ``Exceeded`` argument is handled exactly
        when the shape allows it and absorbs otherwise."""
        n = nat(n, cap)
        cap = min(cap, n.cap)
        if n.is_exceeded:
            if self.kind == "constant":
                return ExtNat(self.params["c"], cap)
            if self.kind == "table":
                return ExtNat(self._prefix[-1], cap)
            if self.kind == "affine" and self.params["a"] == 0:
                return ExtNat(self.params["b"], cap)
            return ExtNat.exceeded(cap)
        return ExtNat(self._tilde_int(n.value), cap)

    def _tilde_int(self, n: int) -> int:
        if self.monotone:
            return self(n)
        if self.kind == "table":
            return self._prefix[min(n, len(self._prefix) - 1)]
        if n > SCAN_LIMIT:
            raise OverflowError(f"monotone majorant of an arbitrary callable at {n} needs a scan "
                                f"beyond {SCAN_LIMIT}; declare it monotone or tabulate it")
        with self._lock:
            pre = self._prefix
            run = pre[-1] if pre else 0
            for j in range(len(pre), n + 1):
                run = max(run, self(j))
                pre.append(run)
            return pre[n]

    def __repr__(self):
        return f"Counterfunction({self.kind}, {self.params})" if self.params else "Counterfunction()"


def _natural(v, name: str) -> int:
    if isinstance(v, bool) or int(v) != v or v < 0:
        raise ValueError(f"{name} must be a natural number, got {v!r}")
    return int(v)


class TheoremVariant(enum.Enum):
    """Two independent switches: the window kernel and the cycle-gap rate."""

    MAIN = ("sigma", Variant.C3_C2)
    MAIN_C2STAR = ("sigma_star", Variant.C3_C2STAR)
    MAIN_C4 = ("sigma", Variant.C4_C2)
    MAIN_C4_C2STAR = ("sigma_star", Variant.C4_C2STAR)

    @property
    def kernel(self) -> str:
        return self.value[0]

    @property
    def asreg_variant(self) -> Variant:
        return self.value[1]

    @classmethod
    def for_variant(cls, v: Variant) -> "TheoremVariant":
        return next(t for t in cls if t.asreg_variant is v)


# -- the window kernels -------------------------------------------------------

def sigma_kernel(bounds: InstanceBounds, sigma2: Witness | None, k: Nat, n: Nat,
                 cap: int = DEFAULT_CAP) -> ExtNat:
    """``sigma2(ceil((n + ceil(ln(12K^2(k+1))))/gamma) + Q + 1) - Q``."""
    if sigma2 is None:
        raise ValueError("the window kernel needs the sigma2 witness")
    b = bounds
    k = nat(k, cap)
    inner = nat(n, cap) + ceil_ln_ext(12 * b.K**2 * (k + 1), cap)
    return call(sigma2, ceil_div(inner, b.gamma, cap) + (b.Q + 1), cap=cap) - b.Q


def sigma_kernel_star(bounds: InstanceBounds, sigma2star: Witness2 | None, k: Nat, n: Nat,
                      cap: int = DEFAULT_CAP) -> ExtNat:
    """``max(sigma2star(n, 12K^2(k+1) - 1) - Q - l, 1)``.

    The threshold ``1/(12K^2(k+1))`` is passed as the natural
    ``12K^2(k+1) - 1``, whose reciprocal successor is exactly that threshold.
    """
    if sigma2star is None:
        raise ValueError("the window kernel needs the sigma2star witness")
    b = bounds
    k = nat(k, cap)
    v = call(sigma2star, n, 12 * b.K**2 * (k + 1) - 1, cap=cap) - (b.Q + b.l)
    return ext_max(v, 1, cap=cap)


def E_bound(bounds: InstanceBounds, k: Nat, cap: int = DEFAULT_CAP) -> ExtNat:
    """Number of ``h`` iterations:
    ``2^8 3^3 bA K^2 (ceil(bA K~^2 / 2) + 2 bU K~) ceil(1/gamma)^2 (k+1)^4``."""
    b = bounds
    kt = b.K_tilde
    half = -((-b.bA * kt * kt) // 2)
    k1 = nat(k, cap) + 1
    return ExtNat(2**8 * 3**3 * b.bA * b.K**2 * (half + 2 * b.bU * kt) * b.J**2, cap) * (k1 * k1 * k1 * k1)


def eta(bounds: InstanceBounds, kernel: Callable[[Nat, Nat], ExtNat], k: Nat, n: Nat,
        f: Counterfunction, cap: int = DEFAULT_CAP) -> ExtNat:
    """``max(24K(k+1)(f(s) + 1), f(s), 6k + 5)`` with ``s = kernel(k, n)``.

    ``f`` is evaluated through its monotone majorant, which is how the step
    function passes it.
    """
    k = nat(k, cap)
    fs = f.tilde(kernel(k, n), cap)
    return ext_max(24 * bounds.K * (k + 1) * (fs + 1), fs, 6 * k + 5, cap=cap)


# -- parameters and Omega -----------------------------------------------------

@dataclass
class MetaParams:
    """Everything ``Omega`` needs apart from ``k`` and ``f``.

    Parameters
    ----------
    bounds : InstanceBounds
    phi_tilde : callable
        Rate of individual asymptotic regularity.
    kernel : callable
        ``(k, n) -> ExtNat`` window kernel.
    variant : TheoremVariant or None
    E : int, ExtNat or callable, optional
        Override for the number of ``h`` iterations (``k -> E``).  Only
        meant for exercising the composition on small numbers.
    add_Q : bool
        Whether ``Q`` is added at the end (dropped for ``A = I``).
    """

    bounds: InstanceBounds
    phi_tilde: Callable[[Nat], ExtNat]
    kernel: Callable[[Nat, Nat], ExtNat]
    variant: TheoremVariant | None = None
    E: object = None
    add_Q: bool = True
    cap: int = DEFAULT_CAP
    bauschke: bool = field(default=False)

    @classmethod
    def build(cls, bounds: InstanceBounds, schedule: Schedule, variant: TheoremVariant,
              tau: Callable[[int], int] | None = None, cap: int = DEFAULT_CAP,
              E=None) -> "MetaParams":
        rates = AsRegRates(bounds, schedule, variant.asreg_variant, tau=tau, cap=cap)
        if variant.kernel == "sigma":
            if schedule.sigma2 is None:
                raise ValueError("the window kernel needs the sigma2 witness")
            kernel = lambda k, n: sigma_kernel(bounds, schedule.sigma2, k, n, cap)  # noqa: E731
        else:
            kernel = lambda k, n: sigma_kernel_star(bounds, schedule.sigma2star, k, n, cap)  # noqa: E731
        return cls(bounds, rates.phi_tilde, kernel, variant, E, True, cap)

    @classmethod
    def build_bauschke(cls, bounds: InstanceBounds, schedule: Schedule, product: bool = False,
                       tau: Callable[[int], int] | None = None, cap: int = DEFAULT_CAP,
                       E=None) -> "MetaParams":
        """Specialization to ``A = I``: ``bA = gamma = 1``, ``Q = 0``, summability
        condition on the steps, and no trailing ``+ Q``."""
        b = bounds.with_(bA=1, gamma=1, Q=0)
        variant = TheoremVariant.MAIN_C4_C2STAR if product else TheoremVariant.MAIN_C4
        p = cls.build(b, schedule, variant, tau=tau, cap=cap, E=E)
        p.add_Q = False
        p.bauschke = True
        return p

    def k0(self, k: Nat) -> ExtNat:
        """``4(k+1)^2 - 1``."""
        k1 = nat(k, self.cap) + 1
        return 4 * k1 * k1 - 1

    def E_for(self, k: Nat) -> ExtNat:
        if self.E is None:
            return E_bound(self.bounds, k, self.cap)
        e = self.E(k) if callable(self.E) else self.E
        return nat(e, self.cap)

    def K_m(self, m: Nat) -> ExtNat:
        """``24K(m+1)^2``."""
        m1 = nat(m, self.cap) + 1
        return 24 * self.bounds.K * m1 * m1


def h_step(params: MetaParams, f: Counterfunction, m: Nat, k: Nat) -> ExtNat:
    """``max(eta(k0, phi~(K_m), f~), f~(sigma(k0, phi~(K_m))), K_m) + 1``."""
    cap = params.cap
    Km = params.K_m(m)
    if Km.is_exceeded:
        return Km
    k0 = params.k0(k)
    n = params.phi_tilde(Km)
    e = eta(params.bounds, params.kernel, k0, n, f, cap)
    fs = f.tilde(params.kernel(k0, n), cap)
    return ext_max(e, fs, Km, cap=cap) + 1


def h_iterate(params: MetaParams, f: Counterfunction, k: Nat, times: Nat) -> ExtNat:
    """``h^(times)(0)``, stopping early once ``Exceeded``.

    Since ``h(m) > m``, the ``E``-th iterate is at least ``E``; an
    ``Exceeded`` count therefore gives an ``Exceeded`` result.
    """
    times = nat(times, params.cap)
    if times.is_exceeded:
        return ExtNat.exceeded(params.cap)
    m = ExtNat(0, params.cap)
    for _ in range(times.value):
        m = h_step(params, f, m, k)
        if m.is_exceeded:
            break
    return m


def Omega(params: MetaParams, k: Nat, f: Counterfunction) -> ExtNat:
    """``sigma(k0, phi~(24K(h^(E)(0) + 1)^2)) + Q``, or ``Exceeded``."""
    hE = h_iterate(params, f, k, params.E_for(k))
    if hE.is_exceeded:
        return hE
    val = params.kernel(params.k0(k), params.phi_tilde(params.K_m(hE)))
    return val + params.bounds.Q if params.add_Q else val


def Omega_bauschke(params: MetaParams, k: Nat, f: Counterfunction) -> ExtNat:
    """``Omega`` for ``A = I``; requires params from :meth:`MetaParams.build_bauschke`."""
    if not params.bauschke:
        raise ValueError("params were not specialized to A = I")
    return Omega(params, k, f)
