"""Experiment configuration: a JSON record mirroring ExperimentConfig."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import Basis
from .errors import ConfigError, IllConditionedBasis
from .norms import NormModel, norm_from_spec
from .projection import DEFAULT_EPS_ACTIVE_REL, DEFAULT_TOL


@dataclass
class ExperimentConfig:
    basis: Basis
    f: NormModel
    f_d: NormModel
    recon_norm: NormModel
    tau_prime: float
    tau_ladder: list
    samples_per_tau: int
    seed: int = 0
    tol: float = DEFAULT_TOL
    eps_active_rel: float = DEFAULT_EPS_ACTIVE_REL
    workers: int = 1
    audit_fraction: float = 0.01
    C_method: str = "quadrature"
    C_budget: int = 10**6
    B_budget: int = 10**6
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not self.tau_prime > 0:
            raise ConfigError("tau_prime", "must be positive")
        if len(self.tau_ladder) == 0:
            raise ConfigError("tau_ladder", "must not be empty")
        lad = [float(t) for t in self.tau_ladder]
        if any(not t > 0 for t in lad):
            raise ConfigError("tau_ladder", "entries must be positive")
        if any(b >= a for a, b in zip(lad, lad[1:])):
            raise ConfigError("tau_ladder", "must be strictly decreasing")
        if any(t >= self.tau_prime for t in lad):
            raise ConfigError("tau_ladder", "every tau must be smaller than tau_prime")
        self.tau_ladder = lad
        if int(self.samples_per_tau) < 1:
            raise ConfigError("samples_per_tau", "must be a positive integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed", "must be a 64-bit unsigned integer")
        if not self.tol > 0:
            raise ConfigError("tol", "must be positive")
        if not self.eps_active_rel > 0:
            raise ConfigError("eps_active_rel", "must be positive")
        if int(self.workers) < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.C_method not in ("quadrature", "montecarlo"):
            raise ConfigError("C_method", "must be 'quadrature' or 'montecarlo'")
        if not 0 <= self.audit_fraction <= 1:
            raise ConfigError("audit_fraction", "must lie in [0, 1]")

    @property
    def dim(self) -> int:
        return self.basis.dim

    def to_dict(self) -> dict:
        return {
            "basis": self.basis.to_json(),
            "f": self.f.to_spec(),
            "f_d": self.f_d.to_spec(),
            "recon_norm": self.recon_norm.to_spec(),
            "tau_prime": self.tau_prime,
            "tau_ladder": list(self.tau_ladder),
            "samples_per_tau": int(self.samples_per_tau),
            "seed": int(self.seed),
            "tol": self.tol,
            "eps_active_rel": self.eps_active_rel,
            "workers": int(self.workers),
            "audit_fraction": self.audit_fraction,
            "C_method": self.C_method,
            "C_budget": int(self.C_budget),
            "B_budget": int(self.B_budget),
        }

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def basis_from_spec(spec, dim=None) -> Basis:
    """A basis from a row-major matrix, or "identity" (needs ``dim``)."""
    if spec is None or spec == "identity":
        if dim is None:
            raise ConfigError("basis", "identity basis needs 'dim'")
        return Basis.identity(int(dim))
    try:
        return Basis(np.array(spec, dtype=float))
    except (IllConditionedBasis, ValueError, TypeError) as exc:
        raise ConfigError("basis", str(exc)) from exc


_KNOWN = {"basis", "dim", "f", "f_d", "recon_norm", "tau_prime", "tau_ladder",
          "samples_per_tau", "seed", "tol", "eps_active_rel", "workers",
          "audit_fraction", "C_method", "C_budget", "B_budget"}


def config_from_dict(d: dict, **overrides) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a JSON object")
    unknown = set(d) - _KNOWN
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown config key")
    d = {**d, **{k: v for k, v in overrides.items() if v is not None}}

    def need(key):
        if key not in d:
            raise ConfigError(key, "missing required key")
        return d[key]

    def norm(key):
        spec = need(key)
        try:
            return norm_from_spec(spec)
        except ConfigError as exc:
            raise ConfigError(f"{key}.{exc.key}", str(exc).split(": ", 1)[-1]) from exc

    basis = basis_from_spec(d.get("basis", "identity"), d.get("dim"))
    try:
        ladder = [float(t) for t in need("tau_ladder")]
    except TypeError as exc:
        raise ConfigError("tau_ladder", "must be a list of numbers") from exc
    try:
        return ExperimentConfig(
            basis=basis,
            f=norm("f"),
            f_d=norm("f_d"),
            recon_norm=norm("recon_norm"),
            tau_prime=float(need("tau_prime")),
            tau_ladder=ladder,
            samples_per_tau=int(need("samples_per_tau")),
            seed=int(d.get("seed", 0)),
            tol=float(d.get("tol", DEFAULT_TOL)),
            eps_active_rel=float(d.get("eps_active_rel", DEFAULT_EPS_ACTIVE_REL)),
            workers=int(d.get("workers", 1)),
            audit_fraction=float(d.get("audit_fraction", 0.01)),
            C_method=str(d.get("C_method", "quadrature")),
            C_budget=int(d.get("C_budget", 10**6)),
            B_budget=int(d.get("B_budget", 10**6)),
            raw=dict(d),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("<root>", str(exc)) from exc


def load_config(path, **overrides) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"{path} is not valid JSON: {exc}") from exc
    return config_from_dict(d, **overrides)


def setup_a(samples_per_tau=10**6, tau_ladder=None, seed=0) -> ExperimentConfig:
    """N=2, identity basis, sum c_i^2 objective, sup-norm data ball of radius 1, l1 error."""
    return config_from_dict({
        "dim": 2,
        "f": {"kind": "sep-quad", "weights": [1, 1]},
        "f_d": {"kind": "sup"},
        "recon_norm": {"kind": "l1"},
        "tau_prime": 1.0,
        "tau_ladder": tau_ladder or [2.0**-j for j in range(2, 8)],
        "samples_per_tau": samples_per_tau,
        "seed": seed,
    })
