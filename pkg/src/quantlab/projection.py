"""Minimization of f(v - u) over the zero cell C(0), and the per-cell problem.

The box |c_i| <= tau/2 lives in basis coordinates, so the solver works in
coordinates and only the objective couples them. The method is a projected
Newton iteration: coordinates pinned at a bound with an outward gradient are
held fixed, a Newton step is taken on the rest, and a projected Armijo search
keeps the iterate feasible. For quadratic objectives the step is exact once
the active set is right, which is typically after one or two iterations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .basis import Basis, cell_center
from .errors import FastPathUnavailable, HypothesisViolation, MaxIterations
from .norms import NormModel, Scaled, SepQuad

DEFAULT_TOL = 1e-10
DEFAULT_EPS_ACTIVE_REL = 1e-9
MAX_ITER = 200
_EPS = np.finfo(float).eps

_FLAT_KINDS = {"sup", "l1"}


@dataclass(frozen=True)
class FacePattern:
    """Signed active set: -1 lower face, +1 upper face, 0 free."""

    s: tuple

    @property
    def K(self) -> int:
        return sum(1 for v in self.s if v != 0)

    @property
    def active(self) -> tuple:
        return tuple(i for i, v in enumerate(self.s) if v != 0)

    def __len__(self):
        return len(self.s)


@dataclass
class SolveResult:
    minimizer: np.ndarray
    coords: np.ndarray
    pattern: FacePattern
    grad_at_min: np.ndarray
    kkt_residual: float
    iterations: int
    degenerate: bool = False


@lru_cache(maxsize=64)
def _setup(f: NormModel, basis: Basis):
    B = None if (f.coordinate_defined or basis.is_identity) else basis.matrix
    Q = f.quadratic_matrix(basis.dim)
    if Q is None:
        return B, None, None
    H2 = 2.0 * (Q if B is None else B.T @ Q @ B)
    H2.setflags(write=False)
    return B, H2, float(np.linalg.norm(H2, 2))


class CoordObjective:
    """phi(c) = F(B (c - a)) in smooth form, with F the model's smooth form.

    For coordinate-defined models (sep-quad) the basis is skipped.
    """

    def __init__(self, f: NormModel, basis: Basis, anchor):
        self.f = f
        self.a = np.asarray(anchor, dtype=float)
        self.B, self.H2, self.L = _setup(f, basis)

    def _x(self, c):
        d = c - self.a
        return d if self.B is None else self.B @ d

    def value(self, c):
        if self.H2 is not None:
            d = c - self.a
            return 0.5 * float(d @ self.H2 @ d)
        return float(self.f.smooth_value(self._x(c)))

    def grad(self, c):
        if self.H2 is not None:
            return self.H2 @ (c - self.a)
        g = self.f.smooth_grad(self._x(c))
        return g if self.B is None else self.B.T @ g

    def hess(self, c):
        if self.H2 is not None:
            return self.H2
        Hx = self.f.smooth_hess(self._x(c))
        return Hx if self.B is None else self.B.T @ Hx @ self.B

    def lipschitz(self, c):
        if self.L is not None:
            return self.L
        return float(np.linalg.norm(self.hess(c), 2))


def _residual(x, g, lo, hi, L, scale):
    if L <= 0:
        return float(np.max(np.abs(g))) / scale if np.any(g) else 0.0
    step = np.clip(x - g / L, lo, hi)
    return float(np.max(np.abs(x - step))) / scale


def box_minimize(obj: CoordObjective, lo, hi, x0, tol=DEFAULT_TOL, scale=1.0,
                 max_iter=MAX_ITER, sigma=1e-4):
    """Projected Newton on the box [lo, hi]; bounds may be infinite or equal.

    Returns (x, g, residual, iterations). The residual is the fixed-point
    gap ||x - clip(x - g/L)||_inf divided by ``scale``. Non-quadratic
    objectives must also propose a projected Newton step below ``0.1 * tol * scale``
    since near-zero curvature makes Newton converge only linearly there.
    """
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fixed = lo == hi
    quadratic = obj.H2 is not None
    # Levenberg shift for non-quadratic objectives: Newton on |y|^p maps y to
    # y (p-2)/(p-1), which oscillates for p < 2; the shift is raised when steps
    # get cut back or reverse direction, and dropped in the end game
    mu, alpha = 0.0, 1.0
    prev_step = last_step = np.zeros_like(x)
    for it in range(max_iter + 1):
        g = obj.grad(x)
        L = obj.lipschitz(x)
        r = _residual(x, g, lo, hi, L, scale)
        if r <= tol and (quadratic or it == max_iter):
            return x, g, r, it
        if it == max_iter:
            break
        if not quadratic:
            if r <= tol:
                mu = 0.0
            elif alpha < 1.0 or float(prev_step @ last_step) < 0:
                mu = max(4.0 * mu, 1e-3 * L)
            elif mu < 1e-8 * L:
                mu = 0.0
            else:
                mu *= 0.25
        eps = min(1e-3 * scale, r * scale)
        binding = fixed | ((x <= lo + eps) & (g > 0)) | ((x >= hi - eps) & (g < 0))
        free = ~binding
        d = np.zeros_like(x)
        if L > 0:
            d[binding & ~fixed] = -g[binding & ~fixed] / L
        if np.any(free):
            Hff = obj.hess(x)[np.ix_(free, free)]
            if mu > 0:
                Hff = Hff + mu * np.eye(len(Hff))
            try:
                d[free] = -np.linalg.solve(Hff, g[free])
                if not np.all(np.isfinite(d)) or d[free] @ g[free] >= 0:
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                d[free] = -g[free] / L if L > 0 else -g[free]
        # a small gradient does not pin x where the curvature vanishes; also ask for a small step
        if r <= tol and mu == 0 and float(np.max(np.abs(np.clip(x + d, lo, hi) - x), initial=0.0)) <= 0.1 * tol * scale:
            return x, g, r, it
        f0 = obj.value(x)
        alpha = 1.0
        stalled = False
        while True:
            xa = np.clip(x + alpha * d, lo, hi)
            decrease = -alpha * float(g[free] @ d[free]) + float(g[binding] @ (x[binding] - xa[binding]))
            fa = obj.value(xa)
            if f0 - fa >= sigma * decrease:
                break
            if abs(f0 - fa) <= 64 * _EPS * abs(f0):
                # values agree to rounding; judge the step by the optimality gap instead
                ra = _residual(xa, obj.grad(xa), lo, hi, obj.lipschitz(xa), scale)
                if ra <= max(r, 16 * _EPS):
                    break
            if alpha < 1e-20:
                stalled = True
                break
            alpha *= 0.5
        if stalled or np.array_equal(xa, x):
            if r <= tol:
                # no representable progress left
                return x, g, r, it
            if quadratic or mu > 1e6 * L:
                break
            alpha = 0.0
            continue
        prev_step, last_step = last_step, xa - x
        x = xa
    raise MaxIterations(f"projected Newton did not reach residual {tol:g} (last {r:.3g})")


def _gate(f: NormModel):
    kind = f.base.kind if isinstance(f, Scaled) else f.kind
    if kind in _FLAT_KINDS or (kind == "weighted-p" and f.p == 1):
        raise HypothesisViolation(f"{kind} has flat level sets and cannot be an objective")


def pattern_of(x, tau, eps_active_rel=DEFAULT_EPS_ACTIVE_REL):
    eps = eps_active_rel * tau
    half = tau / 2
    s = np.where(x >= half - eps, 1, np.where(x <= -half + eps, -1, 0))
    return FacePattern(tuple(int(v) for v in s))


def _finish(obj, x, g, r, it, tau, basis, tol, eps_active_rel):
    pattern = pattern_of(x, tau, eps_active_rel)
    L = obj.lipschitz(x)
    act = np.array(pattern.s) != 0
    degenerate = bool(np.any(np.abs(g[act]) <= tol * max(L, 1e-300) * tau))
    return SolveResult(
        minimizer=basis.from_coords(x),
        coords=x,
        pattern=pattern,
        grad_at_min=g,
        kkt_residual=r,
        iterations=it,
        degenerate=degenerate,
    )


def solve_P(u, tau: float, f: NormModel, basis: Basis, tol: float = DEFAULT_TOL,
            eps_active_rel: float = DEFAULT_EPS_ACTIVE_REL, start=None) -> SolveResult:
    """Minimize f(v - u) over v in C(0); returns the minimizer and its face pattern."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    _gate(f)
    a = basis.to_coords(u)
    obj = CoordObjective(f, basis, a)
    half = np.full(basis.dim, tau / 2)
    x0 = a if start is None else basis.to_coords(start)
    x, g, r, it = box_minimize(obj, -half, half, x0, tol=tol, scale=tau)
    return _finish(obj, x, g, r, it, tau, basis, tol, eps_active_rel)


def solve_Ptilde(k, tau: float, f: NormModel, basis: Basis, tol: float = DEFAULT_TOL,
                 eps_active_rel: float = DEFAULT_EPS_ACTIVE_REL) -> SolveResult:
    """Minimize f over the cell C(k) by translating the zero-cell problem.

    f(w + c) with w in C(0) is (P)(-c), c the cell center; since f is even
    the face pattern has the same support as that of (P)(c).
    """
    k = np.asarray(k, dtype=np.int64)
    center = cell_center(k, tau, basis)
    r = solve_P(-center, tau, f, basis, tol=tol, eps_active_rel=eps_active_rel)
    r.minimizer = r.minimizer + center
    r.coords = r.coords + tau * k
    return r


def fast_path_available(f: NormModel, basis: Basis) -> bool:
    base = f.base if isinstance(f, Scaled) else f
    return isinstance(base, SepQuad) and basis.is_orthogonal()


def clamp_fast_path(u, tau: float, f: NormModel, basis: Basis,
                    eps_active_rel: float = DEFAULT_EPS_ACTIVE_REL) -> SolveResult:
    """Closed-form solution for a separable quadratic: clamp each coordinate."""
    if not fast_path_available(f, basis):
        raise FastPathUnavailable("clamp needs a separable-quadratic objective and an orthogonal basis")
    a = basis.to_coords(u)
    x = np.clip(a, -tau / 2, tau / 2)
    base = f.base if isinstance(f, Scaled) else f
    scale = f.c if isinstance(f, Scaled) else 1.0
    g = 2.0 * scale * base.weights * (x - a)
    L = 2.0 * scale * float(np.max(base.weights))
    pattern = pattern_of(x, tau, eps_active_rel)
    act = np.array(pattern.s) != 0
    return SolveResult(
        minimizer=basis.from_coords(x),
        coords=x,
        pattern=pattern,
        grad_at_min=g,
        kkt_residual=_residual(x, g, -tau / 2, tau / 2, L, tau),
        iterations=0,
        degenerate=bool(np.any(np.abs(g[act]) <= DEFAULT_TOL * L * tau)),
    )

