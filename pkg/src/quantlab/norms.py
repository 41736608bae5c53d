"""Objective norms f, data norms f_d and the hypothesis diagnostics.

Every model exposes ``value`` (possibly a power of a norm, see ``degree``),
``norm`` (the underlying norm, homogeneous of degree one), ``grad`` and, for
the solver, a smooth form. Degree-one norms are squared before minimization:
the argmin over a convex set is unchanged and the objective becomes C^2 away
from degenerate directions.

``SepQuad`` is special: it is defined through basis coordinates,
f(sum_i u_i psi_i) = sum_i w_i u_i^2, so its ``value`` takes coordinates and
it ignores the basis it is paired with.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConfigError,
    DegenerateAtOrigin,
    DegenerateGradient,
    HypothesisViolation,
)

LEVEL_SET_TOL = 1e-9


class NormModel:
    kind: str = "abstract"
    degree: float = 1.0
    coordinate_defined = False

    # -- evaluation -------------------------------------------------------
    def value(self, u):
        raise NotImplementedError

    def norm(self, u):
        v = self.value(u)
        return v if self.degree == 1 else np.power(v, 1.0 / self.degree)

    def _grad(self, u):
        raise NotImplementedError

    def grad(self, u):
        u = np.asarray(u, dtype=float)
        if not np.any(u):
            raise DegenerateAtOrigin(f"{self.kind}: gradient undefined at the origin")
        return self._grad(u)

    def dual(self, y):
        """Dual norm of ``norm``; gives bounding boxes of balls."""
        raise NotImplementedError(f"{self.kind} has no closed-form dual norm")

    def ball_volume(self, radius: float, dim: int) -> Optional[float]:
        return None

    # -- solver form ------------------------------------------------------
    def quadratic_matrix(self, dim: int) -> Optional[np.ndarray]:
        """Q with smooth form x^T Q x, or None when the model is not quadratic."""
        return None

    def smooth_value(self, x):
        v = self.value(x)
        return v * v if self.degree == 1 else v

    def smooth_grad(self, x):
        if self.degree == 1:
            if not np.any(x):
                return np.zeros_like(x)
            return 2.0 * self.value(x) * self._grad(x)
        return self._grad(x)

    def smooth_hess(self, x):
        return _fd_hessian(self.smooth_grad, x)

    # -- misc -------------------------------------------------------------
    def scaled(self, c: float) -> "NormModel":
        return Scaled(self, float(c))

    def to_spec(self) -> dict:
        raise NotImplementedError(f"{self.kind} cannot be serialized")

    def __repr__(self):
        return f"{type(self).__name__}({self.to_spec() if self.kind != 'generic' else ''})"


def _fd_hessian(grad, x, rel_step=1e-6):
    x = np.asarray(x, dtype=float)
    n = x.size
    h = rel_step * max(1.0, float(np.max(np.abs(x))))
    H = np.empty((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = h
        H[:, i] = (grad(x + e) - grad(x - e)) / (2 * h)
    return 0.5 * (H + H.T)


@dataclass(repr=False, eq=False)
class SepQuad(NormModel):
    weights: np.ndarray
    kind: str = field(default="sep-quad", init=False)
    degree: float = field(default=2.0, init=False)
    coordinate_defined = True

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or np.any(self.weights <= 0):
            raise ConfigError("weights", "separable-quadratic weights must be a positive vector")

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return np.sum(self.weights * u * u, axis=-1)

    def _grad(self, u):
        return 2.0 * self.weights * u

    def smooth_hess(self, x):
        return np.diag(2.0 * self.weights)

    def quadratic_matrix(self, dim):
        _check_len(self.weights, dim, "weights")
        return np.diag(self.weights)

    def to_spec(self):
        return {"kind": "sep-quad", "weights": self.weights.tolist()}


@dataclass(repr=False, eq=False)
class Euclidean(NormModel):
    kind: str = field(default="euclidean", init=False)
    degree: float = field(default=1.0, init=False)

    def value(self, u):
        return np.linalg.norm(np.asarray(u, dtype=float), axis=-1)

    def _grad(self, u):
        return u / np.linalg.norm(u, axis=-1, keepdims=True)

    def dual(self, y):
        return np.linalg.norm(np.asarray(y, dtype=float), axis=-1)

    def ball_volume(self, radius, dim):
        return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * radius**dim

    def quadratic_matrix(self, dim):
        return np.eye(dim)

    def smooth_hess(self, x):
        return 2.0 * np.eye(len(x))

    def to_spec(self):
        return {"kind": "euclidean"}


@dataclass(repr=False, eq=False)
class Ellipsoidal(NormModel):
    """sqrt(u^T Q u) for symmetric positive definite Q."""

    Q: np.ndarray
    kind: str = field(default="ellipsoidal", init=False)
    degree: float = field(default=1.0, init=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ConfigError("Q", "ellipsoidal Q must be a square matrix")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ConfigError("Q", "ellipsoidal Q must be symmetric")
        if np.min(np.linalg.eigvalsh(Q)) <= 0:
            raise ConfigError("Q", "ellipsoidal Q must be positive definite")
        self.Q = Q
        self._Qinv = np.linalg.inv(Q)

    @classmethod
    def diag(cls, d):
        return cls(np.diag(np.asarray(d, dtype=float)))

    def value(self, u):
        u = np.asarray(u, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", u, self.Q, u))

    def _grad(self, u):
        Qu = u @ self.Q
        return Qu / self.value(u)[..., None]

    def dual(self, y):
        y = np.asarray(y, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", y, self._Qinv, y))

    def ball_volume(self, radius, dim):
        _check_len(self.Q, dim, "Q")
        return Euclidean().ball_volume(radius, dim) / math.sqrt(np.linalg.det(self.Q))

    def quadratic_matrix(self, dim):
        _check_len(self.Q, dim, "Q")
        return self.Q

    def smooth_hess(self, x):
        return 2.0 * self.Q

    def to_spec(self):
        return {"kind": "ellipsoidal", "Q": self.Q.tolist()}


@dataclass(repr=False, eq=False)
class PPower(NormModel):
    """sum_i |u_i|^p, homogeneous of degree p."""

    p: float
    kind: str = field(default="p-power", init=False)

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigError("p", "p-power requires p > 1")
        self.p = float(self.p)

    @property
    def degree(self):
        return self.p

    def value(self, u):
        return np.sum(np.abs(np.asarray(u, dtype=float)) ** self.p, axis=-1)

    def norm(self, u):
        return self.value(u) ** (1.0 / self.p)

    def _grad(self, u):
        return self.p * np.sign(u) * np.abs(u) ** (self.p - 1)

    def smooth_value(self, x):
        return self.value(x)

    def smooth_grad(self, x):
        return self._grad(np.asarray(x, dtype=float))

    def smooth_hess(self, x):
        a = np.abs(np.asarray(x, dtype=float))
        scale = max(float(np.max(a)), 1e-300)
        # |x|^(p-2) blows up (p<2) or vanishes (p>2) at zero; clamp relative to the largest entry
        a = np.maximum(a, 1e-8 * scale)
        return np.diag(self.p * (self.p - 1) * a ** (self.p - 2))

    def dual(self, y):
        q = self.p / (self.p - 1)
        return np.sum(np.abs(np.asarray(y, dtype=float)) ** q, axis=-1) ** (1.0 / q)

    def ball_volume(self, radius, dim):
        return WeightedP(self.p, np.ones(dim)).ball_volume(radius, dim)

    def to_spec(self):
        return {"kind": "p-power", "p": self.p}


@dataclass(repr=False, eq=False)
class SupNorm(NormModel):
    kind: str = field(default="sup", init=False)
    degree: float = field(default=1.0, init=False)

    def value(self, u):
        return np.max(np.abs(np.asarray(u, dtype=float)), axis=-1)

    def _grad(self, u):
        a = np.abs(u)
        g = np.where(a == a.max(axis=-1, keepdims=True), np.sign(u), 0.0)
        return g / np.sum(np.abs(g), axis=-1, keepdims=True)

    def dual(self, y):
        return np.sum(np.abs(np.asarray(y, dtype=float)), axis=-1)

    def ball_volume(self, radius, dim):
        return (2.0 * radius) ** dim

    def to_spec(self):
        return {"kind": "sup"}


@dataclass(repr=False, eq=False)
class L1Norm(NormModel):
    kind: str = field(default="l1", init=False)
    degree: float = field(default=1.0, init=False)

    def value(self, u):
        return np.sum(np.abs(np.asarray(u, dtype=float)), axis=-1)

    def _grad(self, u):
        return np.sign(u)

    def dual(self, y):
        return np.max(np.abs(np.asarray(y, dtype=float)), axis=-1)

    def ball_volume(self, radius, dim):
        return (2.0 * radius) ** dim / math.factorial(dim)

    def to_spec(self):
        return {"kind": "l1"}


@dataclass(repr=False, eq=False)
class WeightedP(NormModel):
    """(sum_i w_i |u_i|^p)^(1/p)."""

    p: float
    weights: np.ndarray
    kind: str = field(default="weighted-p", init=False)
    degree: float = field(default=1.0, init=False)

    def __post_init__(self):
        if not self.p >= 1:
            raise ConfigError("p", "weighted p-norm requires p >= 1")
        self.p = float(self.p)
        self.weights = np.asarray(self.weights, dtype=float)
        if np.any(self.weights <= 0):
            raise ConfigError("weights", "weighted p-norm weights must be positive")

    def value(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        return np.sum(self.weights * u**self.p, axis=-1) ** (1.0 / self.p)

    def _grad(self, u):
        v = self.value(u)[..., None]
        return self.weights * np.sign(u) * (np.abs(u) / v) ** (self.p - 1)

    def dual(self, y):
        y = np.abs(np.asarray(y, dtype=float))
        if self.p == 1:
            return np.max(y / self.weights, axis=-1)
        q = self.p / (self.p - 1)
        return np.sum(self.weights ** (-q / self.p) * y**q, axis=-1) ** (1.0 / q)

    def ball_volume(self, radius, dim):
        _check_len(self.weights, dim, "weights")
        p = self.p
        unit = (2 * math.gamma(1 + 1 / p)) ** dim / math.gamma(1 + dim / p)
        return unit * float(np.prod(self.weights ** (-1 / p))) * radius**dim

    def to_spec(self):
        return {"kind": "weighted-p", "p": self.p, "weights": self.weights.tolist()}


@dataclass(repr=False, eq=False)
class Generic(NormModel):
    """User-supplied objective: positively homogeneous of ``degree``, convex."""

    value_fn: Callable
    grad_fn: Callable
    degree: float = 1.0
    kind: str = field(default="generic", init=False)

    def value(self, u):
        u = np.asarray(u, dtype=float)
        if u.ndim == 1:
            return float(self.value_fn(u))
        return np.array([self.value_fn(r) for r in u])

    def _grad(self, u):
        if u.ndim == 1:
            return np.asarray(self.grad_fn(u), dtype=float)
        return np.array([self.grad_fn(r) for r in u])


@dataclass(repr=False, eq=False)
class Scaled(NormModel):
    """c * base; same minimizers as ``base`` for any c > 0."""

    base: NormModel
    c: float
    kind: str = field(default="scaled", init=False)

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("scale must be positive")

    @property
    def degree(self):
        return self.base.degree

    @property
    def coordinate_defined(self):
        return self.base.coordinate_defined

    def value(self, u):
        return self.c * self.base.value(u)

    def _grad(self, u):
        return self.c * self.base._grad(u)

    def quadratic_matrix(self, dim):
        Q = self.base.quadratic_matrix(dim)
        return None if Q is None else (self.c**2 if self.degree == 1 else self.c) * Q

    def smooth_value(self, x):
        return (self.c**2 if self.degree == 1 else self.c) * self.base.smooth_value(x)

    def smooth_grad(self, x):
        return (self.c**2 if self.degree == 1 else self.c) * self.base.smooth_grad(x)

    def smooth_hess(self, x):
        return (self.c**2 if self.degree == 1 else self.c) * self.base.smooth_hess(x)

    def dual(self, y):
        return self.base.dual(y) / self.c

    def to_spec(self):
        return {"kind": "scaled", "c": self.c, "base": self.base.to_spec()}


def _check_len(param, dim, key):
    if len(param) != dim:
        raise ConfigError(key, f"has length {len(param)} but the basis has dimension {dim}")


_ALIASES = {
    "sep-quad": "sep-quad",
    "separable-quadratic": "sep-quad",
    "euclidean": "euclidean",
    "l2": "euclidean",
    "ellipsoidal": "ellipsoidal",
    "p-power": "p-power",
    "sup": "sup",
    "coordinate-sup": "sup",
    "linf": "sup",
    "l1": "l1",
    "coordinate-l1": "l1",
    "weighted-p": "weighted-p",
    "scaled": "scaled",
}


def norm_from_spec(spec: dict) -> NormModel:
    """Build a model from a tagged record such as {"kind": "sep-quad", "weights": [1, 1]}."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("kind", f"norm spec must be an object with a 'kind' field, got {spec!r}")
    kind = _ALIASES.get(spec["kind"])
    if kind is None:
        raise ConfigError("kind", f"unknown norm kind {spec['kind']!r}")

    def need(key):
        if key not in spec:
            raise ConfigError(key, f"required for norm kind {kind!r}")
        return spec[key]

    try:
        if kind == "sep-quad":
            return SepQuad(need("weights"))
        if kind == "euclidean":
            return Euclidean()
        if kind == "ellipsoidal":
            if "Q" in spec:
                return Ellipsoidal(spec["Q"])
            return Ellipsoidal.diag(need("diag"))
        if kind == "p-power":
            return PPower(need("p"))
        if kind == "sup":
            return SupNorm()
        if kind == "l1":
            return L1Norm()
        if kind == "weighted-p":
            return WeightedP(need("p"), need("weights"))
        return Scaled(norm_from_spec(need("base")), need("c"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("kind", f"bad parameters for {kind!r}: {exc}") from exc


# -- diagnostics ------------------------------------------------------------


def gauss_map(f: NormModel, u) -> np.ndarray:
    """Unit normal grad f(u) / ||grad f(u)||_2 at a point of the unit level set."""
    u = np.asarray(u, dtype=float)
    if abs(float(f.norm(u)) - 1.0) > LEVEL_SET_TOL:
        raise ValueError("gauss_map expects a point with f(u) = 1")
    g = f.grad(u)
    n = np.linalg.norm(g)
    if n == 0 or not np.isfinite(n):
        raise DegenerateGradient(f"zero gradient at {u.tolist()}")
    return g / n


@dataclass
class CurvatureDiagnostic:
    lipschitz_estimate_hinv: float
    strict_convexity_margin: float
    samples: int
    warning: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.strict_convexity_margin > 0


def _level_set_points(f, dirs):
    return dirs / f.norm(dirs)[:, None]


def check_hypotheses(f: NormModel, samples: int = 1000, seed: int = 0, dim: int = 2,
                     lipschitz_warn: float = 1e3) -> CurvatureDiagnostic:
    """Sampled check of strict convexity and of the Lipschitz inverse Gauss map.

    Pairs are drawn both at random and as close neighbours (relative offsets
    1e-2 and 1e-3) so the ratio ||u1 - u2|| / ||h(u1) - h(u2)|| probes local
    flatness. Raises HypothesisViolation when some midpoint is not strictly
    inside the unit ball.
    """
    if samples < 100:
        raise ValueError("check_hypotheses needs at least 100 samples")
    if hasattr(f, "weights"):
        dim = len(f.weights)
    elif hasattr(f, "Q"):
        dim = len(f.Q)
    rng = np.random.default_rng(seed)
    base = _level_set_points(f, rng.standard_normal((samples, dim)))
    firsts, seconds = [base], [base[rng.permutation(samples)]]
    for scale in (1e-2, 1e-3):
        firsts.append(base)
        seconds.append(_level_set_points(f, base + scale * rng.standard_normal((samples, dim))))
    u1 = np.concatenate(firsts)
    u2 = np.concatenate(seconds)
    keep = np.linalg.norm(u1 - u2, axis=1) > 0
    u1, u2 = u1[keep], u2[keep]

    gaps = 1.0 - f.norm(0.5 * (u1 + u2))
    worst = int(np.argmin(gaps))
    margin = float(gaps[worst])
    if not margin > 0:
        raise HypothesisViolation(
            f"{f.kind}: level set not strictly convex (margin {margin:.3g})",
            witness=(u1[worst].tolist(), u2[worst].tolist()),
        )

    g1 = f.grad(u1)
    g2 = f.grad(u2)
    h1 = g1 / np.linalg.norm(g1, axis=1, keepdims=True)
    h2 = g2 / np.linalg.norm(g2, axis=1, keepdims=True)
    dh = np.linalg.norm(h1 - h2, axis=1)
    du = np.linalg.norm(u1 - u2, axis=1)
    with np.errstate(divide="ignore"):
        ratios = np.where(dh > 0, du / dh, np.inf)
    lip = float(np.max(ratios))
    warning = None
    if lip > lipschitz_warn:
        warning = (f"{f.kind}: inverse Gauss map Lipschitz estimate {lip:.3g} "
                   f"exceeds {lipschitz_warn:g}; the curved-norm hypothesis is doubtful")
    return CurvatureDiagnostic(lip, margin, int(len(u1)), warning)
