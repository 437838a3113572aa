"""Fitted convergence order of the finite-difference Christoffel oracle.

For each chart and random point, fits log(err) against log(h) over the step
ladder. For charts whose metric is polynomial of degree <= 2 the central
difference is exact and the error is roundoff, so the fitted slope is noise.

    python3 scripts/convergence_orders.py --points 5
"""
import argparse

import numpy as np

from solnil.charts import christoffel_at, fd_oracle_christoffel, get_chart


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--charts", default="sol,nil")
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--h", default="1e-2,5e-3,2.5e-3")
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    hs = np.array([float(v) for v in args.h.split(",")])
    pts = np.random.default_rng(args.seed).uniform(-2, 2, (args.points, 3))
    print("chart  point                        errors                               order")
    for name in args.charts.split(","):
        chart = get_chart(name)
        for p in pts:
            exact = christoffel_at(chart, p)
            errs = np.array([np.max(np.abs(fd_oracle_christoffel(chart, p, h) - exact)) for h in hs])
            order = np.polyfit(np.log(hs), np.log(np.maximum(errs, np.finfo(float).tiny)), 1)[0]
            print(f"{name:<6} {np.array2string(p, precision=3):<28} "
                  f"{np.array2string(errs, precision=2):<36} {order:8.3f}")


if __name__ == "__main__":
    main()
