"""Fit code-size exponents for a few objectives and set them beside N-K and (N-K)/(N+1).

Counting gives P(K) ~ A_K tau^(N-K) / B, so against log tau the slope
should approach N-K. Against log E the slope is the same because E is
linear in tau; the (N-K)/(N+1) column is printed only for comparison.
"""
import argparse
import logging

from quantlab.config import config_from_dict
from quantlab.report import print_table
from quantlab.scaling import run_scaling

CASES = {
    "sep-quad N=2": {"dim": 2, "f": {"kind": "sep-quad", "weights": [1, 1]}},
    "ellipsoidal N=2": {"dim": 2, "f": {"kind": "ellipsoidal", "Q": [[2, 0.6], [0.6, 1]]}},
    "sep-quad N=3": {"dim": 3, "f": {"kind": "sep-quad", "weights": [1, 2, 0.5]}},
    "p-power(3) N=2": {"dim": 2, "f": {"kind": "p-power", "p": 3}},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=2 * 10**5)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--case", action="append", choices=sorted(CASES))
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    rows = []
    for name in args.case or CASES:
        cfg = config_from_dict({
            **CASES[name], "f_d": {"kind": "sup"}, "recon_norm": {"kind": "euclidean"},
            "tau_prime": 1.0, "tau_ladder": [2.0**-j for j in range(2, 7)],
            "samples_per_tau": args.samples, "seed": args.seed,
        })
        report = run_scaling(cfg)
        n = report.dim
        e = report.fits["E_vs_tau"]
        for K, fk in report.fits["per_K"].items():
            row = {"case": name, "K": K, "N-K": n - K, "(N-K)/(N+1)": round((n - K) / (n + 1), 4),
                   "A_K": report.constants["A_K"][K], "slope_E_tau": e["slope"]}
            if "tau" in fk:
                row["slope_tau"] = fk["tau"]["slope"]
                row["slope_E"] = fk["E"]["slope"]
            else:
                row["slope_tau"] = fk["error"]
            rows.append(row)
    print_table(rows, ["case", "K", "N-K", "(N-K)/(N+1)", "slope_tau", "slope_E", "slope_E_tau", "A_K"])


if __name__ == "__main__":
    main()
