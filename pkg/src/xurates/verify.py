"""Empirical checks that tie the computed rates to actual trajectories.

Every check is a row ``(check, k, index, lhs, rhs, pass)``; a rate is
confirmed at the index it names and at eight later indices up to the
simulation budget.  Trajectory inequalities get an absolute slack of
``1e-9`` that absorbs rounding only.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .asreg import Variant
from .engine import InvariantMonitor, ProblemInstance, Trajectory, residuals_at, stream_samples
from .meta import Counterfunction
from .nonexp import CyclicFamily, default_tau, has_tau, tilde
from .ratekit import (ExtNat, sigma0, sigma0_star, xumeta_sigma, xumeta_sigma_star)

SLACK = 1e-9
N_LATER = 8


@dataclass
class Row:
    check: str
    k: int | str
    index: int | str
    lhs: float | str
    rhs: float | str
    passed: bool | None

    def as_list(self) -> list[str]:
        def fmt(v):
            if isinstance(v, float):
                return repr(v)
            return "" if v is None else str(v)
        status = "skip" if self.passed is None else ("pass" if self.passed else "fail")
        return [self.check, fmt(self.k), fmt(self.index), fmt(self.lhs), fmt(self.rhs), status]


@dataclass
class Report:
    """Collected check rows plus free-form notes and invariant statistics."""

    name: str = ""
    rows: list[Row] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    invariants: dict = field(default_factory=dict)

    def add(self, check, k, index, lhs, rhs, passed) -> None:
        self.rows.append(Row(check, k, index, lhs, rhs, passed))

    def skip(self, check, k, reason: str) -> None:
        self.rows.append(Row(check, k, "", "", "", None))
        self.notes.append(f"{check} k={k}: skipped ({reason})")

    def extend(self, other: "Report") -> "Report":
        self.rows.extend(other.rows)
        self.notes.extend(other.notes)
        for key, val in other.invariants.items():
            self.invariants[key] = _merge_inv(self.invariants.get(key), val)
        return self

    @property
    def passes(self) -> int:
        return sum(1 for r in self.rows if r.passed is True)

    @property
    def failures(self) -> int:
        return sum(1 for r in self.rows if r.passed is False)

    @property
    def skipped(self) -> int:
        return sum(1 for r in self.rows if r.passed is None)

    @property
    def ok(self) -> bool:
        return self.failures == 0

    def failed_rows(self) -> list[Row]:
        return [r for r in self.rows if r.passed is False]

    def summary(self) -> dict:
        return {"passes": self.passes, "failures": self.failures, "skipped": self.skipped}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "k", "index", "lhs", "rhs", "pass"])
        for r in sorted(self.rows, key=_row_key):
            w.writerow(r.as_list())
        return buf.getvalue()

    def to_json(self) -> str:
        doc = dict(self.summary())
        if self.invariants:
            doc["invariants"] = self.invariants
        if self.notes:
            doc["notes"] = self.notes
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write(self, out_dir: str, stem: str) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        csv_path = os.path.join(out_dir, f"{stem}.csv")
        json_path = os.path.join(out_dir, f"{stem}.json")
        write_atomic(csv_path, self.to_csv())
        write_atomic(json_path, self.to_json())
        return csv_path, json_path


def _row_key(r: Row):
    k = r.k if isinstance(r.k, int) else -1
    i = r.index if isinstance(r.index, int) else -1
    return (r.check, k, i)


def _merge_inv(a, b):
    if a is None:
        return dict(b)
    return {"checked": a["checked"] + b["checked"], "violations": a["violations"] + b["violations"],
            "worst_excess": max(a["worst_excess"], b["worst_excess"])}


def write_atomic(path: str, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def later_indices(rate: int, budget: int, count: int = N_LATER) -> list[int]:
    """``rate + ceil((budget - rate)^(j/count))`` for ``j = 1..count``, deduplicated."""
    if budget <= rate:
        return []
    span = budget - rate
    out = []
    for j in range(1, count + 1):
        n = rate + min(span, math.ceil(span ** (j / count)))
        if n not in out:
            out.append(n)
    return out


# -- rate sweeps --------------------------------------------------------------

def _rate_points(rate: ExtNat, budget: int, room: int) -> list[int] | None:
    if rate.is_exceeded or rate.value + room > budget:
        return None
    n0 = rate.value
    return [n0] + later_indices(n0, budget - room)


def sweep(inst: ProblemInstance, variant: Variant | Sequence[Variant], k_max: int, budget: int,
          suites: Sequence[str] = ("asreg", "gap"), monitor: bool = True,
          rate_override: Callable[[int], int] | None = None) -> Report:
    """Run the asymptotic-regularity and cycle-gap checks in one pass.

    Several variants may share the pass; their check names carry the
    variant tag.  ``rate_override`` replaces ``Phi`` (used to confirm that
    the harness detects a rate that is too small).
    """
    variants = [variant] if isinstance(variant, Variant) else list(variant)
    l = inst.l
    report = Report(inst.name)
    plan: list[tuple[str, str, int, int, float]] = []
    tau_known = has_tau(inst.family)
    for v in variants:
        rates = inst.rates(v)
        tag = f"[{v.value}]"
        for k in range(k_max + 1):
            tol = 1.0 / (k + 1)
            if "asreg" in suites:
                phi = ExtNat(rate_override(k), inst.cap) if rate_override else rates.Phi(k)
                pts = _rate_points(phi, budget, 0)
                if pts is None:
                    report.skip("asreg" + tag, k, f"Phi({k})={phi} beyond budget {budget}")
                else:
                    plan += [("asreg", tag, k, n, tol) for n in pts]
                if tau_known and rate_override is None:
                    pt = rates.phi_tilde(k)
                    pts = _rate_points(pt, budget, 0)
                    if pts is None:
                        report.skip("asreg-individual" + tag, k, f"phi~({k})={pt} beyond budget {budget}")
                    else:
                        plan += [("asreg-individual", tag, k, n, tol) for n in pts]
            if "gap" in suites:
                sig = rates.Sigma(k)
                pts = _rate_points(sig, budget, l)
                if pts is None:
                    report.skip("gap" + tag, k, f"Sigma({k})={sig} beyond budget {budget}")
                else:
                    plan += [("gap", tag, k, n, tol) for n in pts]
    needed = {budget} if monitor else set()
    for check, _, _, n, _ in plan:
        needed.add(n)
        if check == "gap":
            needed.add(n + l)
    mon = InvariantMonitor(inst) if monitor else None
    xs = stream_samples(inst, needed, monitor=mon)
    cache: dict[tuple[str, int], float] = {}
    for check, tag, k, n, tol in plan:
        key = (check, n)
        if key not in cache:
            x = xs[n]
            if check == "asreg":
                cache[key] = float(np.linalg.norm(x - tilde(inst.family, n)(x)))
            elif check == "asreg-individual":
                cache[key] = max(float(np.linalg.norm(x - T(x))) for T in inst.family.maps)
            else:
                cache[key] = float(np.linalg.norm(xs[n + l] - x))
        lhs = cache[key]
        report.add(check + tag, k, n, lhs, tol, lhs <= tol + SLACK)
    if mon is not None:
        report.invariants = mon.summary()
    return report


def verify_asreg(inst: ProblemInstance, variant: Variant, k_max: int, budget: int,
                 rate_override: Callable[[int], int] | None = None, monitor: bool = True) -> Report:
    """``|x_n - T~_n x_n| <= 1/(k+1)`` from ``Phi(k)`` on, and every individual
    residual from ``phi~(k)`` on (when a tau modulus is known)."""
    return sweep(inst, variant, k_max, budget, ("asreg",), monitor, rate_override)


def verify_cauchy_gap(inst: ProblemInstance, variant: Variant, k_max: int, budget: int,
                      monitor: bool = True) -> Report:
    """``|x_{n+l} - x_n| <= 1/(k+1)`` from the variant's cycle-gap rate on."""
    return sweep(inst, variant, k_max, budget, ("gap",), monitor)


# -- metastability ------------------------------------------------------------

def window_diameter_at_most(X: np.ndarray, tol: float, block: int = 512) -> bool:
    """Exact test of ``max_{i,j} |X_i - X_j| <= tol`` with early exit."""
    n = X.shape[0]
    if n <= 1:
        return True
    if X.shape[1] == 1:
        return float(X.max() - X.min()) <= tol
    c = X[0]
    r = np.sqrt(np.sum((X - c) ** 2, axis=1))
    if float(r.max()) > tol:
        return False
    if 2.0 * float(r.max()) <= tol:
        return True
    sq = np.sum(X * X, axis=1)
    t2 = tol * tol
    for a in range(0, n, block):
        Xa = X[a: a + block]
        G = sq[a: a + block, None] + sq[None, a:] - 2.0 * (Xa @ X[a:].T)
        if float(G.max()) > t2 * (1 + 1e-12):
            # confirm with the direct formula to rule out cancellation
            i, j = np.unravel_index(int(np.argmax(G)), G.shape)
            if float(np.linalg.norm(Xa[i] - X[a + j])) > tol:
                return False
    return True


@dataclass
class MetastableResult:
    N: int | None
    window_end: int | None
    scanned: int

    @property
    def found(self) -> bool:
        return self.N is not None


def find_metastable_N(source, k: int, f: Counterfunction, budget: int) -> MetastableResult:
    """Least ``N <= budget`` with ``|x_i - x_j| <= 1/(k+1)`` for all ``i, j in [N, f~(N)]``.

    ``source`` is a :class:`ProblemInstance` or a :class:`Trajectory`.
    """
    traj = source if isinstance(source, Trajectory) else Trajectory(source, limit=10**8)
    tol = 1.0 / (k + 1) + SLACK
    for N in range(budget + 1):
        end = f.tilde(N).value
        if end <= N:
            return MetastableResult(N, end, N + 1)
        if float(np.linalg.norm(traj.x(end) - traj.x(N))) > tol:
            continue
        if window_diameter_at_most(traj.window(N, end), tol):
            return MetastableResult(N, end, N + 1)
    return MetastableResult(None, None, budget + 1)


def verify_meta(inst: ProblemInstance, k_values: Iterable[int], fs: dict[str, Counterfunction],
                budget: int, omega: Callable[[int, Counterfunction], ExtNat] | None = None) -> Report:
    report = Report(f"{inst.name}:meta")
    traj = Trajectory(inst, limit=10**8)
    for k in k_values:
        for name, f in fs.items():
            res = find_metastable_N(traj, k, f, budget)
            check = f"meta[{name}]"
            if not res.found:
                report.add(check, k, "", "exhausted", budget, False)
                continue
            if omega is None:
                report.add(check, k, res.N, res.N, "", True)
                continue
            om = omega(k, f)
            if om.is_exceeded:
                report.add(check, k, res.N, res.N, str(om), True)
            else:
                report.add(check, k, res.N, res.N, om.value, res.N <= om.value)
    return report


# -- Xu-lemma oracles ---------------------------------------------------------

@dataclass
class Recurrence:
    """Synthetic data ``s_{i+1} = max(0, (1-a_i) s_i + a_i b_i + c_i)``.

    The sequences are periodic continuations of finite tables for ``a`` and
    given explicitly for ``b``, ``c`` up to the horizon; beyond the table
    ``b`` follows its envelope ``b_tail(i)`` and ``c`` is zero.
    """

    a: list[Fraction]
    b: list[Fraction]
    c: list[Fraction]
    s0: Fraction
    b_tail: Callable[[int], Fraction]
    window: tuple[int, int] | None = None
    k: int | None = None

    def a_at(self, i: int) -> Fraction:
        return self.a[i % len(self.a)]

    def b_at(self, i: int) -> Fraction:
        return self.b[i] if i < len(self.b) else self.b_tail(i)

    def c_at(self, i: int) -> Fraction:
        return self.c[i] if i < len(self.c) else Fraction(0)

    def run(self, n: int) -> list[Fraction]:
        s = [self.s0]
        for i in range(n):
            a = self.a_at(i)
            s.append(max(Fraction(0), (1 - a) * s[-1] + a * self.b_at(i) + self.c_at(i)))
        return s

    # brute-force witnesses
    def theta(self, k: int) -> int:
        total, n = Fraction(0), 0
        while True:
            total += self.a_at(n)
            if total >= k:
                return n
            n += 1

    def Aprime(self, m: int, k: int) -> int:
        prod, n = Fraction(1), m
        bound = Fraction(1, k + 1)
        while True:
            prod *= 1 - self.a_at(n)
            if prod <= bound:
                return n
            n += 1

    def limsup_rate(self, k: int) -> int:
        """Least ``m`` with ``b_n <= 1/(k+1)`` for all ``n >= m`` (tail is the envelope)."""
        bound = Fraction(1, k + 1)
        n = len(self.b)
        while self.b_tail(n) > bound:
            n += 1
        if n > len(self.b):
            return n
        bad = [i for i, v in enumerate(self.b) if v > bound]
        return bad[-1] + 1 if bad else 0


COMBINATORS = ("sigma0", "sigma0_star", "xumeta", "xumeta_star")


def _dyadic_below(x: Fraction, bits: int = 24) -> Fraction:
    return Fraction(math.floor(x * 2**bits), 2**bits)


def random_recurrence(rng: np.random.Generator, combinator: str) -> Recurrence:
    """Random exact-rational recurrence satisfying the combinator's premises."""
    a = [Fraction(int(rng.integers(1, 9)), 8) for _ in range(int(rng.integers(1, 6)))]
    s0 = Fraction(int(rng.integers(0, 17)), 8)
    env = Fraction(int(rng.integers(1, 5)))
    if combinator in ("sigma0", "sigma0_star"):
        horizon = int(rng.integers(5, 40))
        b = [_dyadic_below(Fraction(rng.uniform(-1, 1)) * env / (i + 1)) for i in range(horizon)]
        return Recurrence(a, b, [], s0, lambda i, e=env: e / (i + 1))
    k = int(rng.integers(0, 4))
    n = int(rng.integers(0, 20))
    hb = Fraction(1, 3 * (k + 1))
    b_pre = [_dyadic_below(Fraction(rng.uniform(-1, 2))) for _ in range(n)]
    return Recurrence(a, b_pre, [], s0, lambda i, h=hb: h, window=(n, 0), k=k)


def _finish_window(rec: Recurrence, q: int, rng: np.random.Generator) -> None:
    n, _ = rec.window
    k = rec.k
    hb = Fraction(1, 3 * (k + 1))
    rec.b = rec.b[:n] + [_dyadic_below(Fraction(rng.uniform(-1, 1)) * hb) for _ in range(n, q + 1)]
    cb = Fraction(1, 3 * (k + 1) * (q + 1))
    rec.c = [Fraction(0)] * n + [_dyadic_below(Fraction(rng.random()) * cb) for _ in range(n, q + 1)]
    rec.window = (n, q)


def xu_lemma_oracle(rec: Recurrence, combinator: str, k_max: int | None = None,
                    extra: int = 200, rng: np.random.Generator | None = None) -> Report:
    """Run the recurrence with equality and check the combinator's conclusion.

    The convergence combinators are checked on ``[rate, rate + extra]`` for
    every ``k <= k_max``; the window combinators on ``[sigma(k, n), q]`` for
    the recurrence's own ``k``.
    """
    report = Report(combinator)
    if combinator in ("sigma0", "sigma0_star"):
        k_max = 3 if k_max is None else k_max
        horizon_hint = len(rec.b) + extra
        s_bound = max([rec.s0] + [max(Fraction(0), rec.b_at(i)) for i in range(horizon_hint)]
                      + [rec.b_tail(len(rec.b))])
        L = max(1, math.ceil(s_bound))
        for k in range(k_max + 1):
            if combinator == "sigma0":
                rate = sigma0(rec.theta, rec.limsup_rate, L, k)
            else:
                rate = sigma0_star(rec.Aprime, rec.limsup_rate, L, k)
            N = rate.value
            s = rec.run(N + extra)
            worst = max(s[N:])
            report.add(combinator, k, N, float(worst), 1.0 / (k + 1), worst <= Fraction(1, k + 1))
        return report
    if combinator not in ("xumeta", "xumeta_star"):
        raise ValueError(f"unknown combinator {combinator!r}")
    rng = rng or np.random.default_rng(0)
    n, q = rec.window
    k = rec.k
    # s stays below max(s0, 2) + sum c <= L
    L = max(1, math.ceil(max(rec.s0, Fraction(2)))) + 1
    if combinator == "xumeta":
        sig = xumeta_sigma(rec.theta, L, k, n)
    else:
        sig = xumeta_sigma_star(rec.Aprime, L, k, n)
    if q == 0:
        q = sig.value + int(rng.integers(0, 60))
        _finish_window(rec, q, rng)
    s = rec.run(q)
    if max(s) > L:
        report.add(combinator, k, "", float(max(s)), L, False)
        report.notes.append("upper bound L violated by generated data")
        return report
    window = s[sig.value: q + 1]
    worst = max(window) if window else Fraction(0)
    report.add(combinator, k, sig.value, float(worst), 1.0 / (k + 1), worst <= Fraction(1, k + 1))
    return report


def randomized_xu_lemma(combinator: str, cases: int = 100, seed: int = 0, k_max: int = 3) -> Report:
    rng = np.random.default_rng(seed)
    report = Report(f"xulemma:{combinator}")
    for _ in range(cases):
        rec = random_recurrence(rng, combinator)
        report.extend(xu_lemma_oracle(rec, combinator, k_max, rng=rng))
    return report


# -- tau falsification --------------------------------------------------------

@dataclass
class TauCounterexample:
    x: np.ndarray
    m: int
    k: int
    composite_residual: float
    individual_residuals: tuple[float, ...]


def falsify_tau(family: CyclicFamily, K: float, p=None, samples: int = 5000,
                tau: Callable[[int], int] | None = None, k_max: int = 20,
                seed: int = 0) -> TauCounterexample | None:
    """Search ``B_K(p)`` for a point breaking the tau implication.

    Radii are spread over six orders of magnitude so that points with small
    residuals are sampled too.  Finding nothing certifies nothing.
    """
    p = family.p if p is None else np.asarray(p, dtype=float)
    if tau is None:
        tau = lambda k: default_tau(family, k)  # noqa: E731
    rng = np.random.default_rng(seed)
    d = p.size
    l = family.l
    composites = [tilde(family, m) for m in range(l)]
    taus = [int(tau(k)) for k in range(k_max + 1)]
    for _ in range(samples):
        v = rng.standard_normal(d)
        v /= np.linalg.norm(v)
        x = p + K * 10.0 ** (-6.0 * rng.random()) * v
        ind = tuple(float(np.linalg.norm(x - T(x))) for T in family.maps)
        worst = max(ind)
        for m in range(l):
            r = float(np.linalg.norm(x - composites[m](x)))
            for k in range(k_max + 1):
                if r <= 1.0 / (taus[k] + 1) and worst >= 1.0 / (k + 1):
                    return TauCounterexample(x, m, k, r, ind)
    return None
