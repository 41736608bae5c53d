"""Face classes of the zero cell and exact grid counts.

The set of data whose zero-cell projection lands in a given face class is
never built explicitly; membership is decided by solving the projection
problem, and measures are read off grid counts: tau^K times the number of
grid points tau*B*k whose projection has K active faces converges to the
summed projected measure A_K as tau -> 0.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import Basis
from .errors import Degenerate, DimensionTooLarge, EnumerationBudgetExceeded
from .norms import NormModel
from .projection import DEFAULT_EPS_ACTIVE_REL, DEFAULT_TOL, FacePattern, solve_P

ENUMERATION_BUDGET = 10**8
# points exactly on the data-ball boundary must survive rounding in f_d
RADIUS_SLACK = 1e-12


@dataclass(frozen=True)
class ClassId:
    pattern: FacePattern
    tau: float

    @property
    def K(self) -> int:
        return self.pattern.K

    def center(self, basis: Basis) -> np.ndarray:
        """u^c: active coordinates at +-tau/2, free coordinates zero."""
        return basis.from_coords(0.5 * self.tau * np.asarray(self.pattern.s, dtype=float))


def class_centers(K: int, dim: int, tau: float) -> list:
    """All class ids with exactly K active faces (the stratum C_K)."""
    out = []
    for J in itertools.combinations(range(dim), K):
        for signs in itertools.product((-1, 1), repeat=K):
            s = [0] * dim
            for j, sg in zip(J, signs):
                s[j] = sg
            out.append(ClassId(FacePattern(tuple(s)), tau))
    return out


def classify(u, tau: float, f: NormModel, f_d: NormModel, basis: Basis,
             tol: float = DEFAULT_TOL, eps_active_rel: float = DEFAULT_EPS_ACTIVE_REL):
    """Class of the projection of ``u`` onto C(0) and the f_d distance to it."""
    r = solve_P(u, tau, f, basis, tol=tol, eps_active_rel=eps_active_rel)
    if r.degenerate:
        raise Degenerate(f"projection of {np.asarray(u).tolist()} is degenerate")
    if r.pattern.K == 0:
        # interior point: the minimizer is u itself
        return ClassId(r.pattern, tau), 0.0
    return ClassId(r.pattern, tau), float(f_d.norm(np.asarray(u, dtype=float) - r.minimizer))


def constant_M(f_d: NormModel, basis: Basis) -> float:
    """Largest f_d value over the unit coordinate cell {|c_i| <= 1/2}.

    f_d is convex, so the maximum sits at one of the 2^N vertices.
    """
    n = basis.dim
    if n > 20:
        raise DimensionTooLarge(f"vertex enumeration limited to N <= 20, got {n}")
    verts = 0.5 * np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return float(np.max(f_d.norm(basis.from_coords(verts))))


def grid_bounds(f_d: NormModel, basis: Basis, tau: float, radius: float) -> np.ndarray:
    """Per-coordinate bound m_i with |k_i| <= m_i for every k in the f_d ball.

    max of c_i over {f_d(x) <= r} is r times the dual norm of row i of B^-1.
    """
    if radius <= 0:
        return np.zeros(basis.dim, dtype=np.int64)
    reach = radius * np.asarray(f_d.dual(basis.inverse), dtype=float)
    return np.floor(reach / tau * (1 + RADIUS_SLACK) + 1e-9).astype(np.int64)


def enumerate_grid(f_d: NormModel, basis: Basis, tau: float, radius: float,
                   budget: int = ENUMERATION_BUDGET) -> np.ndarray:
    """Integer vectors k with f_d(tau * B k) <= radius, in lexicographic order."""
    m = grid_bounds(f_d, basis, tau, radius)
    total = math.prod(int(2 * v + 1) for v in m)
    if total > budget:
        floor = tau * (total / budget) ** (1.0 / basis.dim)
        raise EnumerationBudgetExceeded(
            f"{total} grid points to enumerate at tau={tau:g} exceeds budget {budget}; "
            f"use tau >= {floor:.3g}", suggested_tau=floor)
    if radius <= 0:
        return np.zeros((0, basis.dim), dtype=np.int64)
    head = np.arange(-m[0], m[0] + 1)
    rest = [np.arange(-v, v + 1) for v in m[1:]]
    tail = (np.stack(np.meshgrid(*rest, indexing="ij"), axis=-1).reshape(-1, len(rest))
            if rest else np.zeros((1, 0), dtype=np.int64))
    chunks = []
    for h in head:
        ks = np.concatenate([np.full((len(tail), 1), h), tail], axis=1)
        keep = f_d.norm(basis.from_coords(tau * ks)) <= radius * (1 + RADIUS_SLACK)
        chunks.append(ks[keep])
    return np.concatenate(chunks).astype(np.int64)


@dataclass
class GridClassification:
    """Projection of every enumerated grid point tau*B*k onto C(0)."""

    tau: float
    radius: float
    ks: np.ndarray
    fd_norm: np.ndarray       # f_d(tau * B k)
    K: np.ndarray             # active faces, -1 when degenerate
    patterns: np.ndarray      # signed faces per point
    distance: np.ndarray      # f_d(u - u*)

    @property
    def degenerate(self) -> np.ndarray:
        return self.K < 0


def _classify_chunk(args):
    ks, tau, f, f_d, basis, tol, eps = args
    n = len(ks)
    K = np.empty(n, dtype=np.int64)
    pats = np.empty((n, basis.dim), dtype=np.int8)
    dist = np.empty(n)
    for i, k in enumerate(ks):
        u = basis.from_coords(tau * k.astype(float))
        r = solve_P(u, tau, f, basis, tol=tol, eps_active_rel=eps)
        pats[i] = r.pattern.s
        K[i] = -1 if r.degenerate else r.pattern.K
        dist[i] = 0.0 if r.pattern.K == 0 else f_d.norm(u - r.minimizer)
    return K, pats, dist


def _map_chunks(fn, items, workers):
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def classify_grid(tau, radius, f, f_d, basis, tol=DEFAULT_TOL,
                  eps_active_rel=DEFAULT_EPS_ACTIVE_REL, workers=1,
                  budget=ENUMERATION_BUDGET) -> GridClassification:
    """Solve (P)(tau*B*k) at every grid point of the f_d ball of ``radius``.

    Chunks are processed in a fixed order, so the result does not depend on
    ``workers``.
    """
    ks = enumerate_grid(f_d, basis, tau, radius, budget=budget)
    fd = f_d.norm(basis.from_coords(tau * ks.astype(float))) if len(ks) else np.zeros(0)
    size = 4096
    chunks = [(ks[i:i + size], tau, f, f_d, basis, tol, eps_active_rel)
              for i in range(0, len(ks), size)]
    parts = _map_chunks(_classify_chunk, chunks, workers)
    if parts:
        K = np.concatenate([p[0] for p in parts])
        pats = np.concatenate([p[1] for p in parts])
        dist = np.concatenate([p[2] for p in parts])
    else:
        K = np.zeros(0, dtype=np.int64)
        pats = np.zeros((0, basis.dim), dtype=np.int8)
        dist = np.zeros(0)
    return GridClassification(tau, radius, ks, fd, K, pats, dist)


@dataclass
class GridCount:
    K: int
    tau: float
    tau_prime: float
    count: int
    scaled: float
    count_lo: int = 0
    count_hi: int = 0
    degenerate_count: int = 0

    def row(self) -> dict:
        return {"K": self.K, "tau": self.tau, "count": self.count, "scaled": self.scaled,
                "count_lo": self.count_lo, "count_hi": self.count_hi,
                "degenerate_count": self.degenerate_count}


def grid_counts(tau, tau_prime, f, f_d, basis, tol=DEFAULT_TOL,
                eps_active_rel=DEFAULT_EPS_ACTIVE_REL, workers=1,
                budget=ENUMERATION_BUDGET, M=None) -> dict:
    """GridCount for every K in 0..N from one enumeration.

    ``count`` uses radius tau'; ``count_lo``/``count_hi`` use tau' -+ M tau,
    the brackets that enclose the sampled probability at finite tau.
    """
    if M is None:
        M = constant_M(f_d, basis)
    hi = tau_prime + M * tau
    lo = tau_prime - M * tau
    g = classify_grid(tau, hi, f, f_d, basis, tol, eps_active_rel, workers, budget)
    out = {}
    ok = ~g.degenerate
    in_mid = g.fd_norm <= tau_prime * (1 + RADIUS_SLACK)
    in_lo = g.fd_norm <= lo * (1 + RADIUS_SLACK) if lo > 0 else np.zeros(len(g.ks), dtype=bool)
    for K in range(basis.dim + 1):
        sel = ok & (g.K == K)
        count = int(np.count_nonzero(sel & in_mid))
        out[K] = GridCount(
            K=K, tau=tau, tau_prime=tau_prime, count=count, scaled=tau**K * count,
            count_lo=int(np.count_nonzero(sel & in_lo)),
            count_hi=int(np.count_nonzero(sel)),
            degenerate_count=int(np.count_nonzero(g.degenerate & in_mid)),
        )
    return out


def count_grid(K, tau, tau_prime, f, f_d, basis, **kw) -> GridCount:
    return grid_counts(tau, tau_prime, f, f_d, basis, **kw)[K]


@dataclass
class AKEstimate:
    K: int
    estimate: float
    table: list = field(default_factory=list)  # rows: tau, count, scaled, diff


def estimate_A_K(K, tau_prime, f, f_d, basis, tau_ladder, **kw) -> AKEstimate:
    return estimate_all_A_K(tau_prime, f, f_d, basis, tau_ladder, Ks=[K], **kw)[K]


def estimate_all_A_K(tau_prime, f, f_d, basis, tau_ladder, Ks=None, counts=None, **kw) -> dict:
    """Scaled counts along a decreasing ladder; the estimate is the finest rung.

    ``counts`` may carry precomputed ``grid_counts`` results keyed by tau.
    """
    ladder = [float(t) for t in tau_ladder]
    if len(ladder) < 3 or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ValueError("tau ladder must be strictly decreasing with at least 3 rungs")
    Ks = list(range(1, basis.dim + 1)) if Ks is None else list(Ks)
    per_tau = {}
    for t in ladder:
        per_tau[t] = counts[t] if counts and t in counts else grid_counts(t, tau_prime, f, f_d, basis, **kw)
    out = {}
    for K in Ks:
        rows, prev = [], None
        for t in ladder:
            gc = per_tau[t][K]
            rows.append({"tau": t, "count": gc.count, "scaled": gc.scaled,
                         "diff": None if prev is None else gc.scaled - prev})
            prev = gc.scaled
        out[K] = AKEstimate(K, rows[-1]["scaled"], rows)
    return out


@dataclass
class SliceCheck:
    klass: ClassId
    passed: bool
    slices: int
    points: int
    witness: tuple = None  # (active-coordinate indices of the slice, list of k)


def slice_uniqueness_scan(tau, tau_prime, f, f_d, basis, tol=DEFAULT_TOL,
                          eps_active_rel=DEFAULT_EPS_ACTIVE_REL, workers=1) -> dict:
    """For every face class, count grid points per slice of its SSAT set.

    A slice fixes the active-coordinate indices (k_j, j in J) of the class;
    each slice may hold at most one grid point whose projection falls in the
    class at f_d distance in ]0, tau'].
    """
    n = basis.dim
    if n > 6:
        raise DimensionTooLarge(f"exhaustive slice enumeration limited to N <= 6, got {n}")
    M = constant_M(f_d, basis)
    g = classify_grid(tau, tau_prime + M * tau, f, f_d, basis, tol, eps_active_rel, workers)
    near = (~g.degenerate) & (g.distance > 0) & (g.distance <= tau_prime * (1 + RADIUS_SLACK))
    groups = {}
    for k, s in zip(g.ks[near], g.patterns[near]):
        s = tuple(int(v) for v in s)
        active = tuple(i for i, v in enumerate(s) if v)
        groups.setdefault(s, {}).setdefault(tuple(int(k[i]) for i in active), []).append(k.tolist())
    out = {}
    for K in range(1, n + 1):
        for cid in class_centers(K, n, tau):
            slices = groups.get(cid.pattern.s, {})
            witness = None
            for key in sorted(slices):
                if len(slices[key]) >= 2:
                    witness = (key, slices[key])
                    break
            out[cid.pattern.s] = SliceCheck(cid, witness is None, len(slices),
                                            sum(len(v) for v in slices.values()), witness)
    return out


def slice_uniqueness_check(klass: ClassId, tau, tau_prime, f, f_d, basis, **kw) -> SliceCheck:
    return slice_uniqueness_scan(tau, tau_prime, f, f_d, basis, **kw)[klass.pattern.s]
