"""Monte Carlo law of the code size, the limit constants and exponent fits.

Data are drawn uniformly from the f_d ball of radius tau' by rejection from
its bounding box. The code size of a datum depends only on its cell, so
each distinct cell is solved once per rung. Random streams are derived per
(rung, chunk) from the config seed, which keeps the report identical for
any worker count.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .basis import Basis, cell_center, quantize
from .codec import encode
from .config import ExperimentConfig
from .errors import AcceptanceTooLow, InsufficientData
from .norms import NormModel
from .projection import DEFAULT_EPS_ACTIVE_REL, DEFAULT_TOL, solve_Ptilde
from .ssat import _map_chunks, constant_M, estimate_all_A_K, grid_counts

log = logging.getLogger(__name__)

CHUNK = 1 << 16
MIN_ACCEPTANCE = 1e-4


@dataclass
class Estimate:
    value: float
    error: float
    method: str

    def __float__(self):
        return float(self.value)


# -- sampling -----------------------------------------------------------------


def bounding_box(f_d: NormModel, tau_prime: float, dim: int) -> np.ndarray:
    """Half-widths of the smallest coordinate box around {f_d(u) <= tau'}."""
    return tau_prime * np.asarray(f_d.dual(np.eye(dim)), dtype=float)


def sample_uniform_ball(f_d: NormModel, tau_prime: float, rng, size=None, dim=None):
    """Uniform draws from {u : f_d(u) <= tau'}.

    Returns ``(samples, acceptance_rate)``; ``samples`` has shape (size, N),
    or (N,) when ``size`` is None.
    """
    if dim is None:
        for attr in ("weights", "Q"):
            if hasattr(f_d, attr):
                dim = len(getattr(f_d, attr))
        if dim is None:
            raise ValueError("dim is required for this data norm")
    n = 1 if size is None else int(size)
    half = bounding_box(f_d, tau_prime, dim)
    if f_d.kind == "sup":
        out = rng.uniform(-half, half, size=(n, dim))
        return (out[0] if size is None else out), 1.0
    got, proposed, accepted = [], 0, 0
    while accepted < n:
        batch = max(1024, int(1.2 * (n - accepted) / max(accepted / proposed, MIN_ACCEPTANCE))
                    if proposed else max(1024, n))
        batch = min(batch, 1 << 22)
        x = rng.uniform(-half, half, size=(batch, dim))
        keep = x[f_d.norm(x) <= tau_prime]
        proposed += batch
        accepted += len(keep)
        got.append(keep)
        if proposed >= 10**4 and accepted / proposed < MIN_ACCEPTANCE:
            raise AcceptanceTooLow(
                f"rejection acceptance {accepted / proposed:.2e} below {MIN_ACCEPTANCE:g}; "
                "use a sup-norm data ball or a smaller dimension")
    out = np.concatenate(got)[:n]
    return (out[0] if size is None else out), accepted / proposed


def _stream(seed: int, rung: int, chunk: int):
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(rung, chunk)))


# -- constants ---------------------------------------------------------------


def compute_C(recon_norm: NormModel, basis: Basis, method: str = "quadrature",
              budget: int = 10**6, seed: int = 0) -> Estimate:
    """Integral of ||v|| over the unit cell {sum v_i psi_i : |v_i| <= 1/2}.

    Quadrature is the midpoint rule on an m^N grid with m doubling while the
    grid fits the budget; ``error`` is the change over the last doubling. With
    even m the kinks of |v_i| fall on cell boundaries, so piecewise-linear
    norms are integrated exactly.
    """
    if budget < 10**5:
        raise ValueError("compute_C needs a budget of at least 1e5 points")
    n = basis.dim
    vol = basis.cell_volume
    if method == "montecarlo":
        rng = np.random.default_rng(seed)
        total, total2, done = 0.0, 0.0, 0
        while done < budget:
            m = min(CHUNK * 4, budget - done)
            v = recon_norm.norm(basis.from_coords(rng.uniform(-0.5, 0.5, size=(m, n))))
            total += float(v.sum())
            total2 += float((v * v).sum())
            done += m
        mean = total / done
        var = max(total2 / done - mean * mean, 0.0)
        return Estimate(mean * vol, math.sqrt(var / done) * vol, "montecarlo")
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    prev, val, m = None, None, 2
    while m**n <= budget:
        mids = (np.arange(m) + 0.5) / m - 0.5
        grid = np.stack(np.meshgrid(*([mids] * n), indexing="ij"), axis=-1).reshape(-1, n)
        prev, val = val, float(np.mean(recon_norm.norm(basis.from_coords(grid)))) * vol
        m *= 2
    err = abs(val - prev) if prev is not None else float("inf")
    return Estimate(val, err, "quadrature")


def compute_B(f_d: NormModel, tau_prime: float, basis: Basis, budget: int = 10**6,
              seed: int = 0, method: str = "auto") -> Estimate:
    """Volume of the data ball over the volume of the unit coordinate cell."""
    n = basis.dim
    exact = f_d.ball_volume(tau_prime, n) if method in ("auto", "closed-form") else None
    if exact is not None:
        return Estimate(exact / basis.cell_volume, 0.0, "closed-form")
    rng = np.random.default_rng(seed)
    half = bounding_box(f_d, tau_prime, n)
    x = rng.uniform(-half, half, size=(budget, n))
    frac = float(np.mean(f_d.norm(x) <= tau_prime))
    box = float(np.prod(2 * half))
    se = math.sqrt(frac * (1 - frac) / budget) * box
    return Estimate(frac * box / basis.cell_volume, se / basis.cell_volume, "montecarlo")


def compute_D_K(A_K: float, B: float, C: float, N: int, K: int):
    """(D_K, D'_K) with D_K = A_K / (B C^((N-K)/(N+1))) and D'_K = A_K / (B C^(N-K))."""
    if min(A_K, B, C) <= 0:
        raise ValueError("A_K, B and C must be positive")
    return A_K / (B * C ** ((N - K) / (N + 1))), A_K / (B * C ** (N - K))


# -- Monte Carlo --------------------------------------------------------------


def _cell_sizes(args):
    ks, tau, f, basis, tol, eps = args
    out = np.empty(len(ks), dtype=np.int64)
    for i, k in enumerate(ks):
        r = solve_Ptilde(k, tau, f, basis, tol=tol, eps_active_rel=eps)
        out[i] = -1 if r.degenerate else r.pattern.K
    return out


@dataclass
class RungResult:
    tau: float
    samples: int
    degenerate: int
    unique_cells: int
    acceptance_rate: float
    counts: np.ndarray
    err_sum: float
    err_sq_sum: float
    audit_checked: int
    audit_mismatches: int


def simulate_rung(config: ExperimentConfig, rung: int, tau: float) -> RungResult:
    n_dim = config.dim
    n = int(config.samples_per_tau)
    basis, f = config.basis, config.f
    us, errs, ks = [], [], []
    acc_num = acc_den = 0.0
    for c, start in enumerate(range(0, n, CHUNK)):
        m = min(CHUNK, n - start)
        rng = _stream(config.seed, rung, c)
        u, rate = sample_uniform_ball(config.f_d, config.tau_prime, rng, size=m, dim=n_dim)
        acc_num += rate * m
        acc_den += m
        k = quantize(u, tau, basis)
        errs.append(config.recon_norm.norm(u - cell_center(k, tau, basis)))
        ks.append(k)
        us.append(u)
    u = np.concatenate(us)
    k = np.concatenate(ks)
    err = np.concatenate(errs)

    cells, inverse = np.unique(k, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    size = 4096
    jobs = [(cells[i:i + size], tau, f, basis, config.tol, config.eps_active_rel)
            for i in range(0, len(cells), size)]
    sizes = np.concatenate(_map_chunks(_cell_sizes, jobs, config.workers)) if jobs else np.zeros(0, int)
    K = sizes[inverse]

    audit_idx = np.arange(0, n, max(1, int(round(1 / config.audit_fraction)))) if config.audit_fraction > 0 else []
    mismatches = 0
    for i in audit_idx:
        if K[i] < 0:
            continue
        if encode(u[i], tau, f, basis, tol=config.tol, eps_active_rel=config.eps_active_rel).size != K[i]:
            mismatches += 1

    valid = K >= 0
    counts = np.bincount(K[valid], minlength=n_dim + 1)
    ev = err[valid]
    return RungResult(
        tau=tau, samples=int(valid.sum()), degenerate=int((~valid).sum()),
        unique_cells=len(cells), acceptance_rate=acc_num / acc_den, counts=counts,
        err_sum=float(ev.sum()), err_sq_sum=float((ev * ev).sum()),
        audit_checked=len(audit_idx), audit_mismatches=mismatches,
    )


@dataclass
class ScalingReport:
    dim: int
    tau_prime: float
    rows: list = field(default_factory=list)        # one per (tau, K)
    rungs: list = field(default_factory=list)       # one per tau
    grid: list = field(default_factory=list)        # GridCount rows
    constants: dict = field(default_factory=dict)
    fits: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "tau_prime": self.tau_prime, "constants": self.constants,
                "rungs": self.rungs, "rows": self.rows, "grid": self.grid, "fits": self.fits}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingReport":
        consts = {k: _int_keys(v) if isinstance(v, dict) else v
                  for k, v in d.get("constants", {}).items()}
        fits = dict(d.get("fits", {}))
        if "per_K" in fits:
            fits["per_K"] = _int_keys(fits["per_K"])
        return cls(d["dim"], d["tau_prime"], d["rows"], d.get("rungs", []), d.get("grid", []),
                   consts, fits)

    def row(self, tau: float, K: int) -> dict:
        for r in self.rows:
            if r["tau"] == tau and r["K"] == K:
                return r
        raise KeyError((tau, K))


def _int_keys(d: dict) -> dict:
    # JSON turns integer keys into strings
    return {int(k) if isinstance(k, str) and k.isdigit() else k: v for k, v in d.items()}


def _ols(x, y):
    res = stats.linregress(x, y)
    dof = len(x) - 2
    half = stats.t.ppf(0.975, dof) * res.stderr if dof > 0 else float("inf")
    return {"slope": float(res.slope), "intercept": float(res.intercept),
            "stderr": float(res.stderr), "ci_lo": float(res.slope - half),
            "ci_hi": float(res.slope + half), "points": len(x)}


def fit_exponents(report: ScalingReport, min_rungs: int = 4) -> dict:
    """Least-squares slopes of log p_hat against log tau and against log E_hat.

    Rungs enter the fit for K when p_hat(K) > 10 / samples. K with fewer
    than ``min_rungs`` usable rungs carry an InsufficientData message instead
    of slopes. Returns {"E_vs_tau": fit, "per_K": {K: entry}}.
    """
    n = report.dim
    per_K = {}
    by_tau = {}
    for r in report.rows:
        by_tau.setdefault(r["tau"], r["E_hat"])
    taus = np.array(sorted(by_tau))
    e_fit = _ols(np.log(taus), np.log([by_tau[t] for t in taus])) if len(taus) >= 2 else None
    for K in range(1, n + 1):
        pts = [r for r in report.rows if r["K"] == K and r["p_hat"] > 10.0 / max(r["samples"], 1)]
        entry = {"N_minus_K": n - K, "reference_exponent": (n - K) / (n + 1)}
        if len(pts) < min_rungs:
            entry["error"] = str(InsufficientData(
                f"K={K}: {len(pts)} usable rungs, need {min_rungs}"))
            per_K[K] = entry
            continue
        lt = np.log([r["tau"] for r in pts])
        le = np.log([r["E_hat"] for r in pts])
        lp = np.log([r["p_hat"] for r in pts])
        entry["tau"] = _ols(lt, lp)
        entry["E"] = _ols(le, lp)
        entry["fitted_prefactor_tau"] = math.exp(entry["tau"]["intercept"])
        entry["fitted_prefactor_E"] = math.exp(entry["E"]["intercept"])
        per_K[K] = entry
    return {"E_vs_tau": e_fit, "per_K": per_K}


def run_scaling(config: ExperimentConfig, grid_budget: int = 10**8) -> ScalingReport:
    n = config.dim
    basis = config.basis
    ladder = config.tau_ladder
    M = constant_M(config.f_d, basis)
    B = compute_B(config.f_d, config.tau_prime, basis, budget=config.B_budget, seed=config.seed)
    C = compute_C(config.recon_norm, basis, method=config.C_method, budget=config.C_budget,
                  seed=config.seed)

    grid = {}
    for t in ladder:
        grid[t] = grid_counts(t, config.tau_prime, config.f, config.f_d, basis, tol=config.tol,
                              eps_active_rel=config.eps_active_rel, workers=config.workers,
                              budget=grid_budget, M=M)
    A = {}
    if len(ladder) >= 3:
        A = {K: est.estimate for K, est in
             estimate_all_A_K(config.tau_prime, config.f, config.f_d, basis, ladder, counts=grid).items()}
    else:
        A = {K: grid[ladder[-1]][K].scaled for K in range(1, n + 1)}

    report = ScalingReport(dim=n, tau_prime=config.tau_prime)
    report.constants = {"M": M, "B": B.value, "B_error": B.error, "B_method": B.method,
                        "C": C.value, "C_error": C.error, "C_method": C.method,
                        "A_K": {}, "D_K": {}, "Dprime_K": {}}
    for K in range(1, n + 1):
        report.constants["A_K"][K] = A[K]
        if A[K] > 0:
            d, dp = compute_D_K(A[K], B.value, C.value, n, K)
        else:
            d = dp = 0.0
        report.constants["D_K"][K] = d
        report.constants["Dprime_K"][K] = dp

    for i, t in enumerate(ladder):
        log.info("rung tau=%g", t)
        rr = simulate_rung(config, i, t)
        s = max(rr.samples, 1)
        e_hat = rr.err_sum / s
        e_var = max(rr.err_sq_sum / s - e_hat**2, 0.0)
        report.rungs.append({
            "tau": t, "samples": rr.samples, "degenerate": rr.degenerate,
            "unique_cells": rr.unique_cells, "acceptance_rate": rr.acceptance_rate,
            "E_hat": e_hat, "E_se": math.sqrt(e_var / s),
            "audit_checked": rr.audit_checked, "audit_mismatches": rr.audit_mismatches,
        })
        for K in range(n + 1):
            p = float(rr.counts[K]) / s
            se = math.sqrt(p * (1 - p) / s)
            gc = grid[t][K]
            scale = t ** (K - n) * B.value
            lhs = p * scale
            bracket = t**K * (gc.count_hi - gc.count_lo)
            report.rows.append({
                "tau": t, "K": K, "samples": rr.samples, "count": int(rr.counts[K]),
                "p_hat": p, "se": se, "E_hat": e_hat, "scaled_prob": p * t ** (K - n),
                "counting_lhs": lhs, "counting_rhs": gc.scaled,
                "counting_tol": 3 * se * scale + bracket,
                "counting_ok": bool(abs(lhs - gc.scaled) <= 3 * se * scale + bracket),
            })
    report.grid = [gc.row() for t in ladder for gc in grid[t].values()]
    report.fits = fit_exponents(report)
    return report


CSV_COLUMNS = ["tau", "K", "p_hat", "se", "E_hat", "scaled_prob", "A_K", "B", "C", "D_K",
               "Dprime_K", "slope_tau", "slope_E", "ci_lo", "ci_hi"]


def scaling_rows(report: ScalingReport) -> list:
    """Flat rows for scaling.csv; every value is taken from the report itself."""
    c = report.constants
    out = []
    for r in report.rows:
        K = r["K"]
        fit = report.fits.get("per_K", {}).get(K, {}) if K >= 1 else {}
        tau_fit = fit.get("tau", {})
        out.append({
            "tau": r["tau"], "K": K, "p_hat": r["p_hat"], "se": r["se"], "E_hat": r["E_hat"],
            "scaled_prob": r["scaled_prob"],
            "A_K": c["A_K"].get(K, ""), "B": c["B"], "C": c["C"],
            "D_K": c["D_K"].get(K, ""), "Dprime_K": c["Dprime_K"].get(K, ""),
            "slope_tau": tau_fit.get("slope", ""),
            "slope_E": fit.get("E", {}).get("slope", ""),
            "ci_lo": tau_fit.get("ci_lo", ""), "ci_hi": tau_fit.get("ci_hi", ""),
        })
    return out
