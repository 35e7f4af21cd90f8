"""Run the Klein consumption-equation rank tests and print both logs.

    python scripts/klein_example.py [--seed N] [--numboot B]
"""

import argparse
from pathlib import Path

from bootrank.cli import main

KLEIN = Path(__file__).resolve().parents[1] / "tests" / "data" / "klein.csv"
BASE = [
    str(KLEIN), "--time", "yr", "--lag", "totinc:1", "--lag", "profits:1",
    "--endog", "profits,wagetot",
    "--inst", "govt,taxnetx,year,wagegovt,capital1,totinc_L1",
    "--partial", "profits_L1", "--cfa",
]

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int)
    ap.add_argument("--numboot", type=int, default=1000)
    args = ap.parse_args()
    extra = ["--numboot", str(args.numboot)]
    if args.seed is not None:
        extra += ["--seed", str(args.seed)]

    print("H0: rank(Pi) <= 1, wild bootstrap")
    main(BASE + extra)
    print()
    print("H0: rank(Pi) = 0, moving blocks of length 2")
    main(BASE + extra + ["--rank", "0", "--blocksize", "2"])
