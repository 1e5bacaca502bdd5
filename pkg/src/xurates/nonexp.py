"""Nonexpansive maps: projections, composites and cyclic families."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hilbert import DimensionError, as_point

FIXED_POINT_TOL = 1e-10

# kernel opcodes, see engine._kernel
IDENTITY, HALFSPACE, BALL, BOX, AFFINE = range(5)


class NonexpansiveOp:
    """Base class; subclasses are immutable and act on 1-D float arrays."""

    kind = "abstract"
    dim: int | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def primitives(self) -> list["NonexpansiveOp"]:
        """Flattened primitive maps in application order."""
        return [self]

    def encode(self) -> tuple[int, np.ndarray]:
        raise NotImplementedError

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.dim is not None and x.shape != (self.dim,):
            raise DimensionError(f"{self.kind}: expected dimension {self.dim}, got {x.shape}")
        return x


class Identity(NonexpansiveOp):
    kind = "identity"

    def __init__(self, dim: int | None = None):
        self.dim = dim

    def __call__(self, x):
        return self._check(x).copy()

    def encode(self):
        return IDENTITY, np.empty(0)

    def __repr__(self):
        return "Identity()"


class HalfspaceProjection(NonexpansiveOp):
    """Projection onto ``{x : <a, x> <= b}``."""

    kind = "halfspace"

    def __init__(self, a, b: float):
        self.a = as_point(a)
        self.a.setflags(write=False)
        self.b = float(b)
        self.dim = self.a.size
        self._aa = float(self.a @ self.a)
        if self._aa == 0.0:
            raise ValueError("halfspace normal vector must be nonzero")

    def __call__(self, x):
        return project_halfspace(self.a, self.b, self._check(x))

    def encode(self):
        return HALFSPACE, np.concatenate([self.a, [self.b, self._aa]])

    def __repr__(self):
        return f"HalfspaceProjection(a={self.a.tolist()}, b={self.b})"


class BallProjection(NonexpansiveOp):
    kind = "ball"

    def __init__(self, center, radius: float):
        self.center = as_point(center)
        self.center.setflags(write=False)
        self.radius = float(radius)
        self.dim = self.center.size
        if self.radius < 0:
            raise ValueError("ball radius must be nonnegative")

    def __call__(self, x):
        x = self._check(x)
        d = x - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return x.copy()
        return self.center + (self.radius / r) * d

    def encode(self):
        return BALL, np.concatenate([self.center, [self.radius]])

    def __repr__(self):
        return f"BallProjection(center={self.center.tolist()}, radius={self.radius})"


class BoxProjection(NonexpansiveOp):
    """Coordinatewise clipping to ``[lo, hi]``; infinite bounds are allowed."""

    kind = "box"

    def __init__(self, lo, hi):
        self.lo = np.array(lo, dtype=float).reshape(-1)
        self.hi = np.array(hi, dtype=float).reshape(-1)
        if self.lo.shape != self.hi.shape or np.any(self.lo > self.hi):
            raise ValueError("box needs lo <= hi with matching shapes")
        if np.any(np.isnan(self.lo)) or np.any(np.isnan(self.hi)):
            raise ValueError("box bounds must not be NaN")
        self.lo.setflags(write=False)
        self.hi.setflags(write=False)
        self.dim = self.lo.size

    def __call__(self, x):
        return np.clip(self._check(x), self.lo, self.hi)

    def encode(self):
        return BOX, np.concatenate([self.lo, self.hi])

    def __repr__(self):
        return f"BoxProjection(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


class AffineProjection(NonexpansiveOp):
    """Projection onto ``offset + span(basis)``.

    ``basis`` holds the direction vectors as columns; it is orthonormalized
    once at construction so that the projection is exactly
    ``offset + Q Q^T (x - offset)``.
    """

    kind = "affine"

    def __init__(self, basis, offset):
        self.offset = as_point(offset)
        self.dim = self.offset.size
        B = np.array(basis, dtype=float)
        if B.size == 0:
            B = np.zeros((self.dim, 0))
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if B.shape[0] != self.dim:
            raise DimensionError("basis rows must match the offset dimension")
        self.basis = B
        if B.shape[1]:
            q, r = np.linalg.qr(B)
            if np.min(np.abs(np.diag(r))) < 1e-12 * max(1.0, np.max(np.abs(r))):
                raise ValueError("affine basis is rank deficient")
            self.q = q
        else:
            self.q = np.zeros((self.dim, 0))
        self.q.setflags(write=False)
        self.offset.setflags(write=False)

    def __call__(self, x):
        x = self._check(x)
        return self.offset + self.q @ (self.q.T @ (x - self.offset))

    def encode(self):
        r = self.q.shape[1]
        return AFFINE, np.concatenate([[float(r)], self.offset, self.q.reshape(-1)])

    def __repr__(self):
        return f"AffineProjection(rank={self.q.shape[1]}, offset={self.offset.tolist()})"


class Composite(NonexpansiveOp):
    """Composition; ``ops[0]`` is applied first."""

    kind = "composite"

    def __init__(self, ops: Sequence[NonexpansiveOp]):
        self.ops = tuple(ops)
        dims = {op.dim for op in self.ops if op.dim is not None}
        if len(dims) > 1:
            raise DimensionError("composite of maps with different dimensions")
        self.dim = dims.pop() if dims else None

    def __call__(self, x):
        y = self._check(x).copy()
        for op in self.ops:
            y = op(y)
        return y

    def primitives(self):
        out = []
        for op in self.ops:
            out.extend(op.primitives())
        return out

    def __repr__(self):
        return f"Composite({list(self.ops)!r})"


def project_halfspace(a, b: float, x) -> np.ndarray:
    """``x - max(0, <a,x> - b)/|a|^2 a``."""
    a = np.asarray(a, dtype=float)
    x = np.asarray(x, dtype=float)
    if a.shape != x.shape:
        raise DimensionError("normal vector and point differ in dimension")
    aa = float(a @ a)
    if aa == 0.0:
        raise ValueError("halfspace normal vector must be nonzero")
    excess = float(a @ x) - b
    if excess <= 0:
        return x.copy()
    return x - (excess / aa) * a


@dataclass
class CyclicFamily:
    """Maps ``T_0..T_{l-1}`` with a known common fixed point ``p``.

    ``tau`` converts smallness of the composite residual into smallness of
    every individual residual on a ball around ``p``.  It is only known in
    closed form for ``l = 1``; for longer families it has to be supplied.
    """

    maps: Sequence[NonexpansiveOp]
    p: np.ndarray
    tau: Callable[[int], int] | None = None
    bP: int = field(init=False)

    def __post_init__(self):
        self.maps = tuple(self.maps)
        if not self.maps:
            raise ValueError("a family needs at least one map")
        self.p = as_point(self.p)
        self.p.setflags(write=False)
        for i, T in enumerate(self.maps):
            if T.dim is not None and T.dim != self.p.size:
                raise DimensionError(f"T_{i} has dimension {T.dim}, p has {self.p.size}")
            err = float(np.linalg.norm(T(self.p) - self.p))
            if err > FIXED_POINT_TOL:
                raise ValueError(f"p is not a fixed point of T_{i} (residual {err:.3e})")
        self.bP = max(1, int(np.ceil(np.linalg.norm(self.p))))
        if self.tau is not None:
            vals = [int(self.tau(k)) for k in range(200)]
            if any(v < 0 for v in vals) or any(b < a for a, b in zip(vals, vals[1:])):
                raise ValueError("tau must be a monotone natural function")

    @property
    def l(self) -> int:
        return len(self.maps)

    @property
    def dim(self) -> int:
        return self.p.size


def cyclic(family: CyclicFamily, n: int) -> NonexpansiveOp:
    """``T_n = T_{n mod l}``."""
    return family.maps[n % family.l]


def tilde(family: CyclicFamily, i: int) -> NonexpansiveOp:
    """``T_{i+l} ... T_{i+1}``: ``T_{i+1}`` acts first, ``T_{i+l}`` last."""
    if family.l == 1:
        return family.maps[0]
    return Composite([cyclic(family, i + j) for j in range(1, family.l + 1)])


def default_tau(family: CyclicFamily, k: int) -> int:
    """The tau modulus at ``k``: identity for one map, else the supplied one."""
    if family.tau is not None:
        return int(family.tau(k))
    if family.l == 1:
        return int(k)
    raise ValueError("tau modulus required for families with more than one map")


def has_tau(family: CyclicFamily) -> bool:
    return family.tau is not None or family.l == 1


def nonexpansive_violation(op: NonexpansiveOp, dim: int, pairs: int = 1000,
                           scale: float = 10.0, seed: int = 0) -> float:
    """Largest ``|Tx - Ty| - |x - y|`` over random pairs (<= 0 when nonexpansive)."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(pairs):
        x = scale * rng.standard_normal(dim)
        y = x + rng.standard_normal(dim) * scale * rng.random()
        worst = max(worst, float(np.linalg.norm(op(x) - op(y)) - np.linalg.norm(x - y)))
    return worst
