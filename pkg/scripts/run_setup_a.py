"""Run the two-dimensional reference experiment and check it against the binomial law.

With f = c_1^2 + c_2^2 and a sup-norm data ball each coordinate lands in the
zero bin with probability tau/2 independently, so the code size is binomial.
"""
import argparse
import math
import logging
from pathlib import Path

from quantlab.config import setup_a
from quantlab.report import RunManifest, print_table, write_csv, write_json
from quantlab.scaling import CSV_COLUMNS, run_scaling, scaling_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=10**6)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out-dir", default="runs/setup_a")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    cfg = setup_a(samples_per_tau=args.samples, seed=args.seed)
    cfg.workers = args.workers
    manifest = RunManifest.from_config(["scripts/run_setup_a.py"], cfg)
    report = run_scaling(cfg)
    manifest.finish()

    rows = []
    for r in report.rows:
        p0 = r["tau"] / 2
        law = [p0 * p0, 2 * p0 * (1 - p0), (1 - p0) ** 2][r["K"]]
        rows.append({"tau": r["tau"], "K": r["K"], "p_hat": r["p_hat"], "binomial": law,
                     "z": (r["p_hat"] - law) / math.sqrt(law * (1 - law) / r["samples"]), "E_hat": r["E_hat"],
                     "E_exact": r["tau"] / 2})
    print_table(rows, ["tau", "K", "p_hat", "binomial", "z", "E_hat", "E_exact"])

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", {"config": cfg.to_dict(), "report": report.to_dict()}, manifest)
    write_csv(out / "scaling.csv", scaling_rows(report), CSV_COLUMNS, manifest)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
