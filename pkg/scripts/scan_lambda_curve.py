#!/usr/bin/env python3
"""Scan the internal-mode eigenvalue curve lambda(p) on both sides of p = 3
and write out_scan/modes.csv plus a plottable lambda_curve.dat."""

import argparse
import sys

from nlslab.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=27,
                    help="samples per p-window")
    ap.add_argument("--N", type=int, default=2048)
    ap.add_argument("--out", default="out_scan")
    args = ap.parse_args()

    rc = cli_main(["modes", "scan", "--p-min", "1.6", "--p-max", "2.9",
                   "--steps", str(args.steps), "--N", str(args.N),
                   "--out", f"{args.out}/low"])
    rc |= cli_main(["modes", "scan", "--p-min", "3.1", "--p-max", "4.8",
                    "--steps", str(args.steps), "--N", str(args.N),
                    "--out", f"{args.out}/high"])
    for side in ("low", "high"):
        rc |= cli_main(["report", "--modes-csv", f"{args.out}/{side}/modes.csv",
                        "--out", f"{args.out}/{side}/report"])
    return rc


if __name__ == "__main__":
    sys.exit(main())
