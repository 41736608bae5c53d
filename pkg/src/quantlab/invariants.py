"""Structural identities of the cell projection, as numeric deviations.

Each check solves a base instance and a transformed one and returns the
largest coordinate disagreement divided by tau, so a solver meeting its
KKT tolerance ``tol`` should report deviations of order ``tol``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import Basis, random_basis, random_orthonormal_basis
from .norms import Ellipsoidal, Euclidean, NormModel, PPower, Scaled, SepQuad
from .projection import DEFAULT_TOL, solve_P

RESCALE_FACTORS = (0.5, 2.0, 10.0)
OBJECTIVE_SCALES = (1e-3, 0.5, 7.0, 1e4)
KINDS = ("sep-quad", "ellipsoidal", "euclidean", "p-power")


@dataclass
class Instance:
    u: np.ndarray
    tau: float
    f: NormModel
    basis: Basis


def random_objective(kind: str, dim: int, rng) -> NormModel:
    if kind == "sep-quad":
        return SepQuad(np.exp(rng.uniform(-1, 1, dim)))
    if kind == "ellipsoidal":
        a = rng.standard_normal((dim, dim))
        return Ellipsoidal(a @ a.T + 0.5 * np.eye(dim))
    if kind == "euclidean":
        return Euclidean()
    if kind == "p-power":
        return PPower(float(rng.choice([1.5, 3.0, 4.0])))
    raise ValueError(f"unknown kind {kind!r}")


def random_instance(rng, max_dim: int = 4, kind: str = None) -> Instance:
    """A datum outside the zero cell, so the projection has at least one active face."""
    dim = int(rng.integers(2, max_dim + 1))
    kind = kind or KINDS[int(rng.integers(len(KINDS)))]
    f = random_objective(kind, dim, rng)
    basis = random_orthonormal_basis(dim, rng) if rng.random() < 0.3 else random_basis(dim, rng)
    tau = float(np.exp(rng.uniform(np.log(0.01), np.log(2.0))))
    c = rng.uniform(-3, 3, dim) * tau
    c[int(rng.integers(dim))] = tau * rng.choice([-1, 1]) * rng.uniform(0.6, 3)
    return Instance(basis.from_coords(c), tau, f, basis)


def _dev(a, b, tau):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) / tau


def rescale_deviation(inst: Instance, lambdas=RESCALE_FACTORS, tol=DEFAULT_TOL) -> float:
    """Moving u along the ray from its projection leaves the projection fixed."""
    r = solve_P(inst.u, inst.tau, inst.f, inst.basis, tol=tol)
    out = 0.0
    for lam in lambdas:
        v = r.minimizer + lam * (inst.u - r.minimizer)
        s = solve_P(v, inst.tau, inst.f, inst.basis, tol=tol)
        out = max(out, _dev(s.coords, r.coords, inst.tau))
    return out


def translation_deviation(inst: Instance, rng, tol=DEFAULT_TOL) -> float:
    """Shifting u along free coordinates shifts the projection by the same amount.

    Returns inf when the face pattern changes.
    """
    r = solve_P(inst.u, inst.tau, inst.f, inst.basis, tol=tol)
    s = np.array(r.pattern.s)
    half = inst.tau / 2
    delta = np.zeros(len(s))
    free = s == 0
    # a new free value strictly inside the cell, away from the faces
    target = rng.uniform(-0.9 * half, 0.9 * half, int(free.sum()))
    delta[free] = target - r.coords[free]
    t = inst.basis.from_coords(delta)
    q = solve_P(inst.u + t, inst.tau, inst.f, inst.basis, tol=tol)
    if q.pattern != r.pattern:
        return float("inf")
    return _dev(q.coords, r.coords + delta, inst.tau)


def objective_scale_deviation(inst: Instance, scales=OBJECTIVE_SCALES, tol=DEFAULT_TOL) -> float:
    """Multiplying f by c > 0 does not move the minimizer."""
    r = solve_P(inst.u, inst.tau, inst.f, inst.basis, tol=tol)
    out = 0.0
    for c in scales:
        s = solve_P(inst.u, inst.tau, Scaled(inst.f, c), inst.basis, tol=tol)
        out = max(out, _dev(s.coords, r.coords, inst.tau))
    return out


def tau_homogeneity_deviation(inst: Instance, lam: float, tol=DEFAULT_TOL) -> float:
    """Scaling u and tau together scales the minimizer."""
    r = solve_P(inst.u, inst.tau, inst.f, inst.basis, tol=tol)
    s = solve_P(lam * inst.u, lam * inst.tau, inst.f, inst.basis, tol=tol)
    return _dev(s.coords / lam, r.coords, inst.tau)
