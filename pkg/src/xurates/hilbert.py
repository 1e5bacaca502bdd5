"""Finite-dimensional model of a real Hilbert space.

Points are 1-D float64 arrays.  The strongly positive operator ``A`` carries
certified bounds: a lower bound ``gamma`` on ``<Ax, x>/|x|^2`` and an upper
bound on the operator norm, both obtained without eigenvalue solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

SYMMETRY_TOL = 1e-12


class DimensionError(ValueError):
    pass


class NotStronglyPositive(ValueError):
    pass


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and convert ``x`` to a finite 1-D float64 array."""
    arr = np.array(x, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise DimensionError("points need dimension >= 1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point has non-finite coordinates")
    if dim is not None and arr.size != dim:
        raise DimensionError(f"expected dimension {dim}, got {arr.size}")
    return arr


def _same_dim(x: np.ndarray, y: np.ndarray) -> None:
    if x.shape != y.shape:
        raise DimensionError(f"dimension mismatch: {x.shape} vs {y.shape}")


def inner(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    _same_dim(x, y)
    return float(np.dot(x, y))


def norm(x) -> float:
    return float(np.linalg.norm(x))


def _as_fraction(g) -> Fraction:
    if isinstance(g, Fraction):
        return g
    if isinstance(g, str):
        return Fraction(g)
    return Fraction(float(g))


@dataclass(frozen=True)
class SpdOperator:
    """Strongly positive self-adjoint operator with certified bounds.

    ``gamma`` is an exact rational (so that ceilings such as ``ceil(1/gamma)``
    are decided exactly) while ``matrix`` holds the float64 entries.
    """

    matrix: np.ndarray
    gamma: Fraction
    norm_upper: float
    bA: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError("operator must be a square matrix")
        _check_symmetric(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "gamma", _as_fraction(self.gamma))
        if not 0 < self.gamma <= 1:
            raise NotStronglyPositive(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.norm_upper < float(self.gamma):
            raise ValueError("norm upper bound below gamma")
        if self.bA != max(1, math.ceil(self.norm_upper)):
            raise ValueError("bA must be the smallest natural >= norm upper bound")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_matrix(cls, matrix, gamma=None) -> "SpdOperator":
        g, upper, bA = certify_bounds(matrix, gamma)
        return cls(np.array(matrix, dtype=float), g, upper, bA)

    def __call__(self, x) -> np.ndarray:
        return apply_A(self, x)

    def scaled(self, mu: float) -> "SpdOperator":
        return SpdOperator.from_matrix(mu * self.matrix)


def _check_symmetric(m: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(m))))
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric (self-adjointness fails)")


def certify_bounds(matrix, gamma=None) -> tuple[Fraction, float, int]:
    """Certified ``(gamma, norm_upper, bA)`` for a symmetric matrix.

    ``gamma`` is the Gershgorin lower bound on the spectrum, replaced by a
    user value when that is larger and passes a Cholesky check, then clipped
    to 1.  ``norm_upper`` is the smaller of the row-sum and Frobenius norms.

    Raises
    ------
    NotStronglyPositive
        When the resulting ``gamma`` is not positive.
    """
    m = np.array(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionError("operator must be a square matrix")
    _check_symmetric(m)
    diag = np.diag(m)
    radii = np.sum(np.abs(m), axis=1) - np.abs(diag)
    g = Fraction(float(np.min(diag - radii)))
    if gamma is not None:
        override = _as_fraction(gamma)
        if override > g:
            shift = m - float(override) * np.eye(m.shape[0])
            shift += 1e-12 * max(1.0, float(np.max(np.abs(m)))) * np.eye(m.shape[0])
            try:
                np.linalg.cholesky(shift)
            except np.linalg.LinAlgError:
                raise NotStronglyPositive(
                    f"supplied gamma={override} exceeds the smallest eigenvalue") from None
            g = override
    if g <= 0:
        raise NotStronglyPositive("not strongly positive: no positive lower bound on <Ax,x>")
    g = min(g, Fraction(1))
    row_sum = float(np.max(np.sum(np.abs(m), axis=1)))
    frob = float(np.linalg.norm(m, "fro"))
    upper = min(row_sum, frob)
    return g, upper, max(1, math.ceil(upper))


def apply_A(A: SpdOperator, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.dim,):
        raise DimensionError(f"expected dimension {A.dim}, got {x.shape}")
    return A.matrix @ x


def power_norm(M, iters: int = 2000, tol: float = 1e-15, seed: int = 0) -> float:
    """Estimate the spectral norm of ``M`` by power iteration on ``M^T M``.

    The estimate is a Rayleigh quotient, hence never above the true norm up
    to rounding.
    """
    M = np.asarray(M, dtype=float)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(M.shape[1])
    x /= np.linalg.norm(x)
    val = 0.0
    for _ in range(iters):
        y = M.T @ (M @ x)
        ny = np.linalg.norm(y)
        if ny == 0.0:
            return 0.0
        new = float(np.sqrt(x @ y))
        x = y / ny
        if abs(new - val) <= tol * max(new, 1.0):
            val = new
            break
        val = new
    return val


def check_contraction_bound(A: SpdOperator, alpha: float) -> tuple[bool, float]:
    """Check ``|I - alpha A| <= 1 - alpha gamma`` with a measured norm."""
    if alpha < 0 or alpha > (1.0 / A.norm_upper) * (1 + 1e-15):
        raise ValueError(f"alpha={alpha} outside [0, 1/norm_upper]")
    est = power_norm(np.eye(A.dim) - alpha * A.matrix)
    return est <= 1.0 - alpha * float(A.gamma) + 1e-8, est
