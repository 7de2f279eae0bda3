#!/usr/bin/env python3
"""Tabulate the radiation damping constant gamma(p) on a p-window where
2*lambda(p) is embedded in the essential spectrum."""

import argparse
import sys

from nlslab.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p-min", type=float, default=1.9)
    ap.add_argument("--p-max", type=float, default=2.0)
    ap.add_argument("--steps", type=int, default=5)
    ap.add_argument("--out", default="out_gamma")
    args = ap.parse_args()

    rc = cli_main(["fgr", "scan", "--p-min", str(args.p_min),
                   "--p-max", str(args.p_max), "--steps", str(args.steps),
                   "--out", args.out])
    rc |= cli_main(["report", "--fgr-csv", f"{args.out}/fgr.csv",
                    "--out", f"{args.out}/report"])
    return rc


if __name__ == "__main__":
    sys.exit(main())
