"""Run the Sol helix scan and write the per-cell CSV plus a JSON summary.

    python3 scripts/run_helix_scan.py --out results/scan.csv --workers 4
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

from solnil.scan import helix_scan, orientation_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--k-min", type=float, default=0.1)
    ap.add_argument("--k-max", type=float, default=2.0)
    ap.add_argument("--n", type=int, default=20, help="grid points per axis for k and tau")
    ap.add_argument("--orientations", type=int, default=4)
    ap.add_argument("--smax", type=float, default=10.0)
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--threshold", type=float, default=1e-2)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("scan.csv"))
    args = ap.parse_args()

    grid = np.round(np.linspace(args.k_min, args.k_max, args.n), 10)
    t0 = time.perf_counter()
    report = helix_scan(grid, grid, orientation_grid(args.orientations), s_max=args.smax,
                        steps=args.steps, threshold=args.threshold, workers=args.workers)
    elapsed = time.perf_counter() - t0
    report.to_csv(args.out)
    summary = report.summary()
    best = min(report.ok_cells, key=lambda c: c.residual, default=None)
    if best is not None:
        summary["argmin"] = {"k": best.k, "tau": best.tau, "euler": list(best.euler)}
    summary["seconds"] = round(elapsed, 1)
    print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
