"""Matching error versus secrecy rate threshold for all designs, CU at 60 degrees."""
import argparse
import csv
import sys
from pathlib import Path

from isacbeam import cli

ROOT = Path(__file__).resolve().parents[1]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--config", default=str(ROOT / "configs" / "fig2.json"))
    p.add_argument("--out", default=str(ROOT / "out" / "fig2"))
    args = p.parse_args()
    code = cli.main(["sweep", args.config, "--out", args.out])
    if code:
        return code
    with open(Path(args.out) / "sweep.csv", newline="") as f:
        rows = list(csv.DictReader(f))
    print(f"{'R0':>5} {'optimal':>10} {'zf':>10} {'separate':>10}  (ratio to sensing-only)")
    for r in rows:
        base = float(r["error_sensing_only"])
        cells = [f"{float(r['error_' + k]) / base:10.4f}" if r["error_" + k] else f"{'-':>10}"
                 for k in ("optimal", "zf", "separate")]
        print(f"{float(r['r0_bpshz']):5.2f} " + " ".join(cells))
    return 0


if __name__ == "__main__":
    sys.exit(main())
