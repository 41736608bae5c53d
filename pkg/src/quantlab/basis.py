"""Coordinates in a basis, the quantization grid and its cells.

Vectors may be passed one at a time, shape ``(N,)``, or stacked as rows,
shape ``(M, N)``; every function maps over the leading axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditionedBasis

MAX_CONDITION = 1e8


@dataclass(frozen=True, eq=False)
class Basis:
    """Columns of ``matrix`` are the basis vectors psi_1..psi_N."""

    matrix: np.ndarray
    inverse: np.ndarray = field(init=False, repr=False)
    cell_volume: float = field(init=False)
    is_identity: bool = field(init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise IllConditionedBasis(f"basis matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise IllConditionedBasis("basis matrix has non-finite entries")
        cond = np.linalg.cond(m)
        if not np.isfinite(cond) or cond > MAX_CONDITION:
            raise IllConditionedBasis(f"condition number {cond:.3g} exceeds {MAX_CONDITION:.0e}")
        inv = np.linalg.inv(m)
        resid = np.max(np.abs(m @ inv - np.eye(len(m))))
        if resid > 1e-10:
            raise IllConditionedBasis(f"inverse residual {resid:.3g} too large")
        m.setflags(write=False)
        inv.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "inverse", inv)
        object.__setattr__(self, "cell_volume", float(abs(np.linalg.det(m))))
        object.__setattr__(self, "is_identity", bool(np.array_equal(m, np.eye(len(m)))))

    @classmethod
    def identity(cls, dim: int) -> "Basis":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_orthogonal(self, atol: float = 1e-12) -> bool:
        gram = self.matrix.T @ self.matrix
        off = gram - np.diag(np.diag(gram))
        return bool(np.max(np.abs(off)) <= atol * max(1.0, np.max(np.abs(gram))))

    def to_coords(self, u):
        u = np.asarray(u, dtype=float)
        _check_dim(u, self.dim)
        if self.is_identity:
            return u.copy()
        return u @ self.inverse.T

    def from_coords(self, c):
        c = np.asarray(c, dtype=float)
        _check_dim(c, self.dim)
        if self.is_identity:
            return c.copy()
        return c @ self.matrix.T

    def to_json(self):
        return self.matrix.tolist()


def _check_dim(v, dim):
    if v.shape[-1:] != (dim,):
        raise ValueError(f"expected trailing dimension {dim}, got shape {v.shape}")


def to_coords(u, basis: Basis):
    return basis.to_coords(u)


def quantize(u, tau: float, basis: Basis) -> np.ndarray:
    """Index of the half-open cell containing ``u``.

    Coordinate i lands in cell k_i when tau*(k_i - 1/2) <= u_i < tau*(k_i + 1/2).
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    c = basis.to_coords(u)
    if not np.all(np.isfinite(c)):
        raise ValueError("non-finite input coordinate")
    k = np.floor(c / tau + 0.5)
    # guard the division rounding across a cell edge
    lower = tau * (k - 0.5)
    k = np.where(c < lower, k - 1, k)
    k = np.where(c >= tau * (k + 0.5), k + 1, k)
    return k.astype(np.int64)


def cell_center(k, tau: float, basis: Basis) -> np.ndarray:
    """The grid point tau * sum_i k_i psi_i."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return basis.from_coords(tau * np.asarray(k, dtype=float))


@dataclass(frozen=True)
class Cell:
    k: tuple
    tau: float

    def lower(self) -> np.ndarray:
        return self.tau * (np.asarray(self.k, dtype=float) - 0.5)

    def upper(self) -> np.ndarray:
        return self.tau * (np.asarray(self.k, dtype=float) + 0.5)

    def contains_coords(self, c) -> bool:
        c = np.asarray(c, dtype=float)
        return bool(np.all(self.lower() <= c) and np.all(c < self.upper()))


def random_basis(dim: int, rng, max_cond: float = 10.0) -> Basis:
    """Random basis with condition number at most ``max_cond``."""
    q1, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    q2, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    s = np.exp(rng.uniform(0.0, np.log(max_cond), size=dim))
    return Basis(q1 @ np.diag(s) @ q2)


def random_orthonormal_basis(dim: int, rng) -> Basis:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return Basis(q * np.sign(np.diag(r)))
