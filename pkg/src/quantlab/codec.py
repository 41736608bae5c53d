"""Encoding a datum by the active faces of its cell minimizer, and decoding.

A code stores the active coordinates and their coordinate values, nothing
else. Decoding fixes the coded coordinates, minimizes f over the free ones,
quantizes those, and reads each coded face side off the sign of the
objective gradient (first-order optimality of the cell problem).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .basis import Basis, cell_center, quantize
from .errors import AmbiguousFace, Degenerate, InconsistentCode
from .norms import NormModel
from .projection import DEFAULT_EPS_ACTIVE_REL, DEFAULT_TOL, CoordObjective, box_minimize, solve_Ptilde

AMBIGUITY_REL = 1e-9


@dataclass(frozen=True)
class Code:
    tau: float
    n: int
    entries: tuple = field(default=())  # ((j, value), ...), j is 1-based

    def __post_init__(self):
        entries = tuple((int(j), float(v)) for j, v in self.entries)
        idx = [j for j, _ in entries]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise InconsistentCode("code indices must be strictly increasing")
        if idx and (idx[0] < 1 or idx[-1] > self.n):
            raise InconsistentCode(f"code indices must lie in 1..{self.n}")
        for j, v in entries:
            m = v / self.tau + 0.5
            if abs(m - round(m)) > 1e-9 * max(1.0, abs(m)):
                raise InconsistentCode(f"value {v!r} at index {j} is not a cell edge")
        object.__setattr__(self, "entries", entries)

    @property
    def size(self) -> int:
        return len(self.entries)

    def to_dict(self) -> dict:
        return {"tau": self.tau, "n": self.n, "entries": [[j, v] for j, v in self.entries]}

    def to_json(self) -> str:
        # repr-based float formatting round-trips doubles exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "Code":
        return cls(float(d["tau"]), int(d["n"]), tuple((j, v) for j, v in d["entries"]))

    @classmethod
    def from_json(cls, s: str) -> "Code":
        return cls.from_dict(json.loads(s))


def encode(u, tau: float, f: NormModel, basis: Basis, tol: float = DEFAULT_TOL,
           eps_active_rel: float = DEFAULT_EPS_ACTIVE_REL) -> Code:
    k = quantize(u, tau, basis)
    r = solve_Ptilde(k, tau, f, basis, tol=tol, eps_active_rel=eps_active_rel)
    if r.degenerate:
        raise Degenerate(f"cell {k.tolist()} has an active face with vanishing gradient")
    # values are emitted as exact edges tau*(k_j -/+ 1/2) rather than the solver's float
    entries = tuple((j + 1, tau * (float(k[j]) + 0.5 * s)) for j, s in enumerate(r.pattern.s) if s)
    return Code(tau, basis.dim, entries)


def decode(code: Code, f: NormModel, basis: Basis, tol: float = DEFAULT_TOL):
    """Recover the cell index and its center from a code.

    Returns ``(k, reconstruction)``.
    """
    n, tau = code.n, code.tau
    if basis.dim != n:
        raise ValueError(f"code dimension {n} does not match basis dimension {basis.dim}")
    coded = np.zeros(n, dtype=bool)
    vals = np.zeros(n)
    for j, v in code.entries:
        coded[j - 1] = True
        vals[j - 1] = v

    lo = np.where(coded, vals, -np.inf)
    hi = np.where(coded, vals, np.inf)
    obj = CoordObjective(f, basis, np.zeros(n))
    scale = max(tau, float(np.max(np.abs(vals))) if code.entries else tau)
    x, _, _, _ = box_minimize(obj, lo, hi, vals, tol=tol, scale=scale)
    g = obj.grad(x)

    k = np.empty(n, dtype=np.int64)
    free = ~coded
    if np.any(free):
        kf = np.floor(x[free] / tau + 0.5)
        edge_gap = np.abs(x[free] / tau + 0.5 - np.round(x[free] / tau + 0.5))
        if np.any(edge_gap <= DEFAULT_EPS_ACTIVE_REL):
            raise InconsistentCode("a recovered free coordinate sits on a cell edge")
        k[free] = kf.astype(np.int64)

    gscale = float(np.max(np.abs(g))) if np.any(g) else 0.0
    for j, v in code.entries:
        gj = g[j - 1]
        if abs(gj) <= AMBIGUITY_REL * gscale or gscale == 0.0:
            raise AmbiguousFace(f"zero objective gradient on coded coordinate {j}")
        m = v / tau
        # positive gradient: the minimizer leans on the lower face tau*(k - 1/2)
        k[j - 1] = int(round(m + 0.5)) if gj > 0 else int(round(m - 0.5))
    return k, cell_center(k, tau, basis)


def reconstruction_error(u, code: Code, norm: NormModel, f: NormModel, basis: Basis) -> float:
    k, center = decode(code, f, basis)
    return float(norm.norm(np.asarray(u, dtype=float) - center))
