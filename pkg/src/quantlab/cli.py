"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 hypothesis gate,
3 runtime failure (enumeration budget, rejection acceptance, solver).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .basis import Basis
from .codec import Code, decode, encode
from .config import basis_from_spec, load_config
from .errors import ConfigError, HypothesisViolation, QuantLabError
from .norms import check_hypotheses, norm_from_spec
from .projection import DEFAULT_EPS_ACTIVE_REL, DEFAULT_TOL
from .report import RunManifest, dumps, print_table, write_csv, write_json
from .scaling import CSV_COLUMNS, ScalingReport, compute_B, compute_C, compute_D_K, fit_exponents, run_scaling, scaling_rows
from .ssat import constant_M, estimate_all_A_K, grid_counts

log = logging.getLogger("quantlab")

COUNT_COLUMNS = ["K", "tau", "count", "scaled", "count_lo", "count_hi", "degenerate_count"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _load_json_arg(text, what):
    """Inline JSON, or a path to a JSON file."""
    p = Path(text)
    try:
        if not text.lstrip().startswith(("{", "[")) and p.exists():
            return json.loads(p.read_text())
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(what, f"cannot parse JSON: {exc}") from exc


def _threads(args):
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("QUANTLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("QUANTLAB_THREADS", f"not an integer: {env!r}") from exc
    return None


def _basis(args, dim):
    if args.basis is None:
        return Basis.identity(dim)
    return basis_from_spec(_load_json_arg(args.basis, "basis"))


def _out_dir(args) -> Path:
    d = Path(args.out_dir or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _manifest(argv, args, cfg=None):
    if cfg is not None:
        return RunManifest.from_config(argv, cfg)
    return RunManifest(command=list(argv), seed=int(getattr(args, "seed", 0) or 0),
                       tolerances={"tol": args.solver_tol, "eps_active_rel": args.solver_eps})


def _load_cfg(args):
    if not args.config:
        raise ConfigError("--config", "a config file is required")
    return load_config(args.config, seed=args.seed, workers=_threads(args), tol=args.tol,
                       eps_active_rel=args.eps_active_rel)


# -- subcommands ----------------------------------------------------------------


def cmd_check_norm(args, argv, out):
    f = norm_from_spec(_load_json_arg(args.spec, "norm"))
    diag = check_hypotheses(f, samples=args.samples, seed=args.seed or 0, dim=args.dim)
    out.write(f"kind: {f.kind}\n")
    out.write(f"strict_convexity_margin: {diag.strict_convexity_margin:.6g}\n")
    out.write(f"lipschitz_estimate_hinv: {diag.lipschitz_estimate_hinv:.6g}\n")
    out.write(f"samples: {diag.samples}\n")
    if diag.warning:
        out.write(f"warning: {diag.warning}\n")
    out.write("result: pass\n")
    return 0


def _vector(text):
    v = _load_json_arg(text, "input")
    if isinstance(v, dict):
        v = v.get("u", v.get("reconstruction"))
    return np.asarray(v, dtype=float)


def cmd_encode(args, argv, out):
    u = _vector(args.input)
    f = norm_from_spec(_load_json_arg(args.norm, "norm"))
    basis = _basis(args, len(u))
    code = encode(u, args.tau, f, basis, tol=args.solver_tol, eps_active_rel=args.solver_eps)
    text = code.to_json()
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        out.write(text + "\n")
    return 0


def cmd_decode(args, argv, out):
    code = Code.from_dict(_load_json_arg(args.input, "code"))
    f = norm_from_spec(_load_json_arg(args.norm, "norm"))
    basis = _basis(args, code.n)
    k, rec = decode(code, f, basis, tol=args.solver_tol)
    text = json.dumps({"k": k.tolist(), "reconstruction": rec.tolist()})
    if args.output:
        Path(args.output).write_text(text + "\n")
    else:
        out.write(text + "\n")
    return 0


def _gate(f, out):
    diag = check_hypotheses(f, samples=1000, seed=0, dim=_dim_hint(f))
    if diag.warning:
        log.warning(diag.warning)
        out.write(f"warning: {diag.warning}\n")
    return diag


def _dim_hint(f):
    for attr in ("weights", "Q"):
        if hasattr(f, attr):
            return len(getattr(f, attr))
    return 2


def cmd_experiment(args, argv, out):
    cfg = _load_cfg(args)
    _gate(cfg.f, out)
    manifest = _manifest(argv, args, cfg)
    report = run_scaling(cfg)
    manifest.finish()
    d = _out_dir(args)
    payload = {"config": cfg.to_dict(), "report": report.to_dict()}
    write_json(d / "report.json", payload, manifest)
    write_csv(d / "scaling.csv", scaling_rows(report), CSV_COLUMNS, manifest)
    write_csv(d / "counts.csv", report.grid, COUNT_COLUMNS, manifest)
    _print_summary(report, out)
    out.write(f"wrote {d / 'report.json'}, {d / 'scaling.csv'}, {d / 'counts.csv'}\n")
    return 0


def _print_summary(report: ScalingReport, out):
    print_table(report.rows, ["tau", "K", "p_hat", "se", "E_hat", "scaled_prob", "counting_ok"], out)
    _print_fits(report, out)


def _print_fits(report: ScalingReport, out):
    n = report.dim
    e = report.fits.get("E_vs_tau")
    if e:
        out.write(f"slope log E vs log tau: {e['slope']:.4f} [{e['ci_lo']:.4f}, {e['ci_hi']:.4f}]\n")
    rows = []
    for K in range(1, n + 1):
        fk = report.fits.get("per_K", {}).get(K, {})
        row = {"K": K, "N-K": n - K, "(N-K)/(N+1)": (n - K) / (n + 1)}
        if "tau" in fk:
            row.update({"slope_tau": fk["tau"]["slope"], "ci_tau": f"[{fk['tau']['ci_lo']:.4f}, {fk['tau']['ci_hi']:.4f}]",
                        "slope_E": fk["E"]["slope"], "ci_E": f"[{fk['E']['ci_lo']:.4f}, {fk['E']['ci_hi']:.4f}]"})
        else:
            row["slope_tau"] = fk.get("error", "")
        rows.append(row)
    print_table(rows, ["K", "N-K", "(N-K)/(N+1)", "slope_tau", "ci_tau", "slope_E", "ci_E"], out)


def cmd_count_grid(args, argv, out):
    cfg = _load_cfg(args)
    ladder = args.tau or cfg.tau_ladder
    manifest = _manifest(argv, args, cfg)
    M = constant_M(cfg.f_d, cfg.basis)
    rows = []
    for t in ladder:
        for gc in grid_counts(t, cfg.tau_prime, cfg.f, cfg.f_d, cfg.basis, tol=cfg.tol,
                              eps_active_rel=cfg.eps_active_rel, workers=cfg.workers, M=M).values():
            rows.append(gc.row())
    manifest.finish()
    d = _out_dir(args)
    write_csv(d / "counts.csv", rows, COUNT_COLUMNS, manifest)
    print_table(rows, COUNT_COLUMNS, out)
    return 0


def cmd_constants(args, argv, out):
    cfg = _load_cfg(args)
    n = cfg.dim
    manifest = _manifest(argv, args, cfg)
    M = constant_M(cfg.f_d, cfg.basis)
    B = compute_B(cfg.f_d, cfg.tau_prime, cfg.basis, budget=cfg.B_budget, seed=cfg.seed)
    C = compute_C(cfg.recon_norm, cfg.basis, method=cfg.C_method, budget=cfg.C_budget, seed=cfg.seed)
    A = estimate_all_A_K(cfg.tau_prime, cfg.f, cfg.f_d, cfg.basis, cfg.tau_ladder, tol=cfg.tol,
                         eps_active_rel=cfg.eps_active_rel, workers=cfg.workers)
    consts = {"M": M, "B": B.value, "B_error": B.error, "C": C.value, "C_error": C.error,
              "A_K": {}, "D_K": {}, "Dprime_K": {}, "A_K_table": {}}
    for K in range(1, n + 1):
        a = A[K].estimate
        consts["A_K"][K] = a
        consts["A_K_table"][K] = A[K].table
        d, dp = compute_D_K(a, B.value, C.value, n, K) if a > 0 else (0.0, 0.0)
        consts["D_K"][K] = d
        consts["Dprime_K"][K] = dp
    manifest.finish()
    d = _out_dir(args)
    write_json(d / "constants.json", {"constants": consts}, manifest)
    out.write(dumps({k: v for k, v in consts.items() if k != "A_K_table"}) + "\n")
    return 0


def cmd_fit(args, argv, out):
    doc = _load_json_arg(args.report, "report")
    report = ScalingReport.from_dict(doc.get("report", doc))
    report.fits = fit_exponents(report, min_rungs=args.min_rungs)
    _print_fits(report, out)
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--threads", type=int, help="worker processes (fallback: QUANTLAB_THREADS)")
    common.add_argument("--tol", type=float, help=f"KKT residual tolerance (default {DEFAULT_TOL:g})")
    common.add_argument("--eps-active-rel", type=float,
                        help=f"active-face tolerance relative to tau (default {DEFAULT_EPS_ACTIVE_REL:g})")
    common.add_argument("--out-dir", help="directory for output files (default: .)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="quantlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("check-norm", parents=[common], help="sampled hypothesis diagnostics for a norm")
    s.add_argument("spec", help='norm spec, e.g. \'{"kind":"euclidean"}\' or a JSON file')
    s.add_argument("--samples", type=int, default=1000)
    s.add_argument("--dim", type=int, default=2)
    s.set_defaults(func=cmd_check_norm)

    for name, func, what in (("encode", cmd_encode, "vector JSON"), ("decode", cmd_decode, "code JSON")):
        s = sub.add_parser(name, parents=[common], help=f"{name} ({what} in)")
        s.add_argument("input", help=f"{what} file or inline JSON")
        s.add_argument("--norm", required=True, help="objective norm spec")
        s.add_argument("--basis", help="basis matrix (row-major JSON) file or inline")
        s.add_argument("-o", "--output")
        if name == "encode":
            s.add_argument("--tau", type=float, required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("experiment", parents=[common], help="run the scaling experiment")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("count-grid", parents=[common], help="exact grid counts per K")
    s.add_argument("--tau", type=float, action="append", help="rung(s); default: config ladder")
    s.set_defaults(func=cmd_count_grid)

    s = sub.add_parser("constants", parents=[common], help="M, B, C, A_K and D_K")
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("fit", parents=[common], help="exponent fits from a report.json")
    s.add_argument("report")
    s.add_argument("--min-rungs", type=int, default=4)
    s.set_defaults(func=cmd_fit)
    return p


def main(argv=None, out=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.solver_tol = args.tol if args.tol is not None else DEFAULT_TOL
    args.solver_eps = args.eps_active_rel if args.eps_active_rel is not None else DEFAULT_EPS_ACTIVE_REL
    try:
        return args.func(args, ["quantlab", *argv], out)
    except HypothesisViolation as exc:
        sys.stderr.write(f"hypothesis violation: {exc}\n")
        if exc.witness is not None:
            sys.stderr.write(f"witness pair: {exc.witness}\n")
        return 2
    except (ConfigError, FileNotFoundError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 1
    except QuantLabError as exc:
        sys.stderr.write(f"error: {exc}\n")
        suggested = getattr(exc, "suggested_tau", None)
        if suggested is not None:
            sys.stderr.write(f"suggested tau floor: {suggested:.3g}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
