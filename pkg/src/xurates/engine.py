"""Trajectories of Xu's iteration, Yamada's iteration and a closed-form oracle.

Xu's iteration is

    x_{n+1} = (I - alpha_{n+1} A) T_{n+1} x_n + alpha_{n+1} u.

Steps are computed by a compiled kernel in a fixed evaluation order (apply
``T``, then ``A``, then the affine combination), so that a trajectory is
bit-for-bit reproducible no matter how it is chunked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as kn
from .asreg import AsRegRates, InstanceBounds, Variant, compute_K, compute_Q
from .hilbert import DimensionError, SpdOperator, as_point, power_norm
from .nonexp import CyclicFamily, Identity, tilde
from .ratekit import DEFAULT_CAP
from .sched import Schedule

CHUNK = 65536
N_PROBES = 4
CHECK_NAMES = ("bound-ineq1", "bound-ineq2", "uATx-bound", "xnl1-xn1-ineq", "xn1-x-sq-ineq")


class BudgetExceeded(RuntimeError):
    pass


class EmbeddingHypothesisViolated(ValueError):
    pass


def _encode_family(family: CyclicFamily, dim: int):
    codes, pstart, chunks, first, count = [], [], [], [], []
    offset = 0
    for T in family.maps:
        prims = [p for p in T.primitives() if not isinstance(p, Identity)]
        first.append(len(codes))
        count.append(len(prims))
        for prim in prims:
            code, par = prim.encode()
            codes.append(code)
            pstart.append(offset)
            chunks.append(par)
            offset += par.size
    params = np.concatenate(chunks) if chunks else np.zeros(1)
    return (np.array(codes, dtype=np.int64), np.array(pstart, dtype=np.int64),
            np.ascontiguousarray(params, dtype=np.float64),
            np.array(first, dtype=np.int64), np.array(count, dtype=np.int64))


@dataclass
class ProblemInstance:
    """One concrete run of Xu's iteration.

    ``bounds`` is derived on first access: ``Q`` from the first witness,
    ``K`` from a simulated ``x_Q``, ``bU`` and ``bP`` from the norms of ``u``
    and ``p``.  ``overrides`` may raise any of them (never lower them).
    """

    A: SpdOperator
    u: np.ndarray
    family: CyclicFamily
    schedule: Schedule
    x0: np.ndarray
    overrides: dict = field(default_factory=dict)
    cap: int = DEFAULT_CAP
    name: str = ""

    def __post_init__(self):
        self.u = as_point(self.u)
        self.x0 = as_point(self.x0)
        d = self.A.dim
        if self.u.size != d or self.x0.size != d or self.family.dim != d:
            raise DimensionError("A, u, x0 and the family must share one dimension")
        for T in self.family.maps:
            if T.dim is not None and T.dim != d:
                raise DimensionError("map dimension differs from the space")
        if self.schedule.l != self.family.l:
            raise ValueError(f"schedule is for l={self.schedule.l}, family has l={self.family.l}")
        self.u.setflags(write=False)
        self.x0.setflags(write=False)
        self._enc = _encode_family(self.family, d)
        self._A = np.ascontiguousarray(self.A.matrix)

    @property
    def dim(self) -> int:
        return self.A.dim

    @property
    def l(self) -> int:
        return self.family.l

    @property
    def p(self) -> np.ndarray:
        return self.family.p

    @cached_property
    def gamma(self):
        """The ``gamma`` the rates use: the schedule's, which must not exceed A's."""
        g = self.schedule.gamma if self.schedule.gamma is not None else self.A.gamma
        if g > self.A.gamma:
            raise ValueError(f"schedule gamma {g} exceeds the certified gamma {self.A.gamma} of A")
        return g

    @cached_property
    def bounds(self) -> InstanceBounds:
        if self.schedule.sigma1 is None:
            raise ValueError("bounds need the sigma1 witness")
        ov = self.overrides
        bA = self.A.bA
        Q = compute_Q(self.schedule.sigma1, bA)
        xQ = self.state(Q)
        K = compute_K(xQ, self.p, self.u, self._A, self.gamma)
        bU = max(1, math.ceil(float(np.linalg.norm(self.u))))
        computed = {"K": K, "bA": bA, "bU": bU, "bP": self.family.bP}
        for key, val in ov.items():
            if key not in computed:
                raise ValueError(f"unknown bound override {key!r}")
            if int(val) != val or val < computed[key]:
                raise ValueError(f"override {key}={val} is below the computed minimum {computed[key]}")
            computed[key] = int(val)
        if computed["bA"] != bA:
            Q = compute_Q(self.schedule.sigma1, computed["bA"])
            xQ = self.state(Q)
            computed["K"] = max(computed["K"], compute_K(xQ, self.p, self.u, self._A, self.gamma))
        return InstanceBounds(K=computed["K"], Q=Q, bA=computed["bA"], bU=computed["bU"],
                              bP=computed["bP"], gamma=self.gamma, l=self.l)

    def rates(self, variant: Variant) -> AsRegRates:
        return AsRegRates(self.bounds, self.schedule, variant, tau=self.family.tau, cap=self.cap)

    def state(self, n: int) -> np.ndarray:
        """``x_n`` computed from scratch (no caching)."""
        x = self.x0.copy()
        done = 0
        while done < n:
            step = min(CHUNK, n - done)
            xs, _ = self._chunk(x, done, step)
            x = xs[-1].copy()
            done += step
        return x

    def _chunk(self, x: np.ndarray, n0: int, steps: int):
        alphas = np.ascontiguousarray(self.schedule.alphas(n0 + 1, n0 + steps + 1), dtype=np.float64)
        if np.any(alphas <= 0) or np.any(alphas > 1):
            raise ValueError("step sizes must lie in (0, 1]")
        xs = np.empty((steps, self.dim))
        ys = np.empty((steps, self.dim))
        codes, pstart, params, first, count = self._enc
        kn.xu_chunk(np.ascontiguousarray(x, dtype=np.float64), n0, alphas, self._A, self.u,
                    codes, pstart, params, first, count, xs, ys)
        return xs, ys


def xu_step(inst: ProblemInstance, x_n, n: int) -> np.ndarray:
    """``(I - alpha_{n+1} A) T_{n+1} x_n + alpha_{n+1} u``."""
    x_n = as_point(x_n, inst.dim)
    xs, _ = inst._chunk(x_n, n, 1)
    return xs[0].copy()


# -- invariant monitoring -----------------------------------------------------

class InvariantMonitor:
    """Per-step inequalities along a trajectory, from index ``Q`` on.

    Each check counts evaluations, violations (excess over ``1e-9(1+|rhs|)``)
    and the worst excess seen.
    """

    def __init__(self, inst: ProblemInstance, n_probes: int = N_PROBES, seed: int = 0):
        b = inst.bounds
        self.inst = inst
        self.Q = b.Q
        self.K = float(b.K)
        self.bA1K = float((b.bA + 1) * b.K)
        self.gamma = float(b.gamma)
        p = inst.p
        self.dist_up = float(np.linalg.norm(inst.u - inst._A @ p))
        rng = np.random.default_rng(seed)
        d = inst.dim
        dirs = rng.standard_normal((n_probes, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = self.K * rng.random(n_probes) ** (1.0 / d)
        self.zs = np.ascontiguousarray(p + dirs * radii[:, None])
        self.zres = np.array([[np.linalg.norm(T(z) - z) for T in inst.family.maps] for z in self.zs])
        self.zw = np.ascontiguousarray(inst.u - self.zs @ inst._A.T)
        self.stats = np.zeros((kn.N_CHECKS, 3))
        self._hist_x = np.empty((0, d))
        self._hist_a = np.empty(0)
        self._next = 0

    def feed(self, x_start: np.ndarray, n0: int, xs: np.ndarray, ys: np.ndarray, alphas: np.ndarray):
        """Consume ``x_{n0+1..}`` (``xs``), ``T x`` values and ``alpha_{n0+1..}``."""
        if n0 != self._next:
            raise ValueError("monitor must be fed consecutive chunks")
        l = self.inst.l
        if n0 == 0:
            self._hist_x = x_start.reshape(1, -1)
        X = np.vstack([self._hist_x, xs])
        xbase = n0 + 1 - self._hist_x.shape[0]
        AL = np.concatenate([self._hist_a, alphas])
        abase = n0 + 1 - self._hist_a.size
        if n0 == 0 and self.Q == 0:
            kn._record(self.stats, kn.BOUND_BALL, float(np.linalg.norm(x_start - self.inst.p)), self.K)
        kn.monitor_chunk(X, xbase, ys, n0 + 1, AL, abase, self.inst.p, self.inst.u, self.inst._A,
                         self.zs, self.zres, self.zw, self.Q, self.K, self.bA1K, self.gamma,
                         self.dist_up, l, self.stats)
        self._hist_x = X[-(l + 1):].copy()
        self._hist_a = AL[-(l + 1):].copy()
        self._next = n0 + xs.shape[0]

    def summary(self) -> dict:
        return {name: {"checked": int(self.stats[i, 0]), "violations": int(self.stats[i, 1]),
                       "worst_excess": float(self.stats[i, 2])}
                for i, name in enumerate(CHECK_NAMES)}

    @property
    def violations(self) -> int:
        return int(self.stats[:, 1].sum())


# -- trajectories -------------------------------------------------------------

class Trajectory:
    """Cached prefix ``x_0..x_N`` that grows on demand.

    Parameters
    ----------
    inst : ProblemInstance
    monitor : bool
        Run the invariant monitors on every extension.
    limit : int
        Largest index that may be cached (memory guard).
    """

    def __init__(self, inst: ProblemInstance, monitor: bool = False, limit: int = 5 * 10**6):
        self.inst = inst
        self.limit = limit
        self._xs = np.empty((1024, inst.dim))
        self._xs[0] = inst.x0
        self._n = 0
        self.monitor = InvariantMonitor(inst) if monitor else None

    @property
    def N(self) -> int:
        """Largest cached index."""
        return self._n

    def extend(self, N: int) -> None:
        if N <= self._n:
            return
        if N > self.limit:
            raise BudgetExceeded(f"index {N} beyond the cached-trajectory limit {self.limit}")
        if N + 1 > self._xs.shape[0]:
            cap = max(N + 1, 2 * self._xs.shape[0])
            grown = np.empty((cap, self.inst.dim))
            grown[: self._n + 1] = self._xs[: self._n + 1]
            self._xs = grown
        while self._n < N:
            step = min(CHUNK, N - self._n)
            n0 = self._n
            xs, ys = self.inst._chunk(self._xs[n0], n0, step)
            if self.monitor is not None:
                alphas = self.inst.schedule.alphas(n0 + 1, n0 + step + 1)
                self.monitor.feed(self._xs[n0], n0, xs, ys, alphas)
            self._xs[n0 + 1: n0 + step + 1] = xs
            self._n += step

    def x(self, n: int) -> np.ndarray:
        self.extend(n)
        return self._xs[n]

    def window(self, a: int, b: int) -> np.ndarray:
        """``x_a..x_b`` inclusive (a view)."""
        self.extend(b)
        return self._xs[a: b + 1]

    def alpha(self, n: int) -> float:
        return self.inst.schedule.alpha(n)


def run(inst: ProblemInstance, N: int, monitor: bool = False) -> Trajectory:
    traj = Trajectory(inst, monitor=monitor, limit=max(N, 5 * 10**6))
    traj.extend(N)
    return traj


def stream_samples(inst: ProblemInstance, indices: Iterable[int], monitor: InvariantMonitor | None = None,
                   budget: int | None = None) -> dict[int, np.ndarray]:
    """Run once up to the largest requested index, keeping only those iterates.

    Memory stays ``O(chunk)`` however long the run is.
    """
    wanted = sorted(set(int(i) for i in indices))
    if not wanted:
        return {}
    top = wanted[-1]
    if budget is not None and top > budget:
        raise BudgetExceeded(f"index {top} beyond budget {budget}")
    out = {}
    if wanted[0] == 0:
        out[0] = inst.x0.copy()
    x = inst.x0.copy()
    n0 = 0
    ptr = 0
    while n0 < top:
        step = min(CHUNK, top - n0)
        xs, ys = inst._chunk(x, n0, step)
        if monitor is not None:
            monitor.feed(x, n0, xs, ys, inst.schedule.alphas(n0 + 1, n0 + step + 1))
        while ptr < len(wanted) and wanted[ptr] <= n0 + step:
            i = wanted[ptr]
            if i > n0:
                out[i] = xs[i - n0 - 1].copy()
            ptr += 1
        x = xs[-1].copy()
        n0 += step
    return out


@dataclass(frozen=True)
class Residuals:
    r_tilde: float
    r_individual: tuple[float, ...]
    gap: float


def residuals_at(inst: ProblemInstance, n: int, x_n: np.ndarray, x_nl: np.ndarray) -> Residuals:
    fam = inst.family
    r_tilde = float(np.linalg.norm(x_n - tilde(fam, n)(x_n)))
    r_i = tuple(float(np.linalg.norm(x_n - T(x_n))) for T in fam.maps)
    return Residuals(r_tilde, r_i, float(np.linalg.norm(x_nl - x_n)))


def residuals(inst: ProblemInstance, traj: Trajectory, n: int) -> Residuals:
    """``|x_n - T~_n x_n|``, ``|x_n - T_i x_n|`` for each ``i`` and ``|x_{n+l} - x_n|``."""
    return residuals_at(inst, n, traj.x(n).copy(), traj.x(n + inst.l).copy())


# -- Yamada's iteration -------------------------------------------------------

def yamada_step(inst: ProblemInstance, v_n, n: int, mu: float = 1.0) -> np.ndarray:
    """``(1 - alpha) T v + alpha f(T v)`` with ``f(x) = x - mu(Ax - u)``.

    For ``mu = 1`` this is ``f(x) = (I - A)x + u``.
    """
    v_n = as_point(v_n, inst.dim)
    a = inst.schedule.alpha(n + 1)
    y = inst.family.maps[(n + 1) % inst.l](v_n)
    fy = y - mu * (inst._A @ y - inst.u)
    return (1.0 - a) * y + a * fy


def measured_I_minus_A(A: SpdOperator, mu: float = 1.0) -> float:
    return power_norm(np.eye(A.dim) - mu * A.matrix)


def check_embedding(inst: ProblemInstance, N: int, mu: float = 1.0) -> float:
    """Largest ``|x_n - v_n|`` for ``n <= N`` with ``v_0 = x_0``.

    ``x`` is Xu's iteration for the data ``(mu A, mu u)`` and ``v`` Yamada's
    iteration with ``f(x) = x - mu(Ax - u)``.

    Raises
    ------
    EmbeddingHypothesisViolated
        When the measured ``|I - mu A|`` is not below 1.
    """
    q = measured_I_minus_A(inst.A, mu)
    if q >= 1.0:
        raise EmbeddingHypothesisViolated(
            f"embedding hypothesis violated: measured |I - A| = {q:.6g} >= 1")
    xu = inst if mu == 1.0 else mu_scaled_embedding(inst, mu)
    traj = run(xu, N)
    v = inst.x0.copy()
    worst = 0.0
    for n in range(N):
        v = yamada_step(inst, v, n, mu)
        worst = max(worst, float(np.linalg.norm(traj.x(n + 1) - v)))
    return worst


def mu_scaled_embedding(inst: ProblemInstance, mu: float) -> ProblemInstance:
    """The instance with ``(mu A, mu u)`` in place of ``(A, u)``; ``0 < mu < 2/|A|``."""
    if not 0 < mu < 2.0 / inst.A.norm_upper:
        raise ValueError(f"mu={mu} outside (0, 2/norm_upper)")
    A_mu = SpdOperator.from_matrix(mu * inst.A.matrix) if mu != 1.0 else inst.A
    return ProblemInstance(A_mu, mu * inst.u, inst.family, inst.schedule, inst.x0,
                           cap=inst.cap, name=f"{inst.name}-mu{mu:g}")


# -- closed-form oracle -------------------------------------------------------

def kkt_oracle(A, u, basis=None, offset=None) -> np.ndarray:
    """Minimizer of ``0.5<Ax, x> - <x, u>`` over ``offset + span(basis)``.

    ``basis=None`` means the whole space.  The reduced system
    ``B^T A B t = B^T (u - A offset)`` is solved directly.
    """
    M = A.matrix if isinstance(A, SpdOperator) else np.asarray(A, dtype=float)
    u = as_point(u, M.shape[0])
    if basis is None:
        return np.linalg.solve(M, u)
    off = np.zeros(M.shape[0]) if offset is None else as_point(offset, M.shape[0])
    B = np.array(basis, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    if B.size == 0 or B.shape[1] == 0:
        return off.copy()
    red = B.T @ M @ B
    rhs = B.T @ (u - M @ off)
    try:
        t = np.linalg.solve(red, rhs)
    except np.linalg.LinAlgError:
        raise ValueError("reduced KKT system is singular (basis rank deficient)") from None
    return off + B @ t


def vip_residual(A, u, x_star, samples_y: Sequence) -> float:
    """``max_y <u - A x*, y - x*>`` over points ``y`` of ``F``; at most 0 at the solution."""
    M = A.matrix if isinstance(A, SpdOperator) else np.asarray(A, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    g = np.asarray(u, dtype=float) - M @ x_star
    Y = np.atleast_2d(np.asarray(samples_y, dtype=float))
    return float(np.max((Y - x_star) @ g))
