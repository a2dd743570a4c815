"""Normalised beampatterns of the three designs at R0 = 3.5 bps/Hz, CU at 60 degrees."""
import argparse
import sys
from pathlib import Path

import numpy as np

from isacbeam import cli
from isacbeam.config import load_config

ROOT = Path(__file__).resolve().parents[1]
DESIGNS = ("optimal", "zf", "separate")


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default=str(ROOT / "out"))
    args = p.parse_args()
    curves = {}
    for name in DESIGNS:
        path = ROOT / "configs" / f"fig3_{name}.json"
        code = cli.main(["run", str(path), "--out", str(Path(args.out) / f"fig3_{name}"), "--normalize"])
        if code:
            return code
        cfg = load_config(path)
        rep = cli.solve_design(cfg, name, cfg.secrecy_rate_bpshz)
        curves[name] = cli.to_db(rep.total_gain / rep.total_gain.max())
    desired = cfg.grid().desired > 0
    for name in DESIGNS[1:]:
        dev = np.abs(curves[name] - curves["optimal"])[desired]
        print(f"{name}: {100 * np.mean(dev < 3):.1f}% of desired samples within 3 dB of optimal, "
              f"max deviation {dev.max():.2f} dB")
    return 0


if __name__ == "__main__":
    sys.exit(main())
