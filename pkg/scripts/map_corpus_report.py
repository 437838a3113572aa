"""Classify the random linear-map corpus and cross-check against the closed forms.

Prints per-target counts by case and the largest closed-vs-numeric gap.

    python3 scripts/map_corpus_report.py --size 1000
"""
import argparse
import json
from collections import Counter

import numpy as np

from solnil.maps import (TARGETS, TOL_MAP, bitension_numeric, classify, corpus_map, default_probes,
                         random_probes, residual_closed)


def report(target, size, seed, n_probes):
    cases, mismatches, gap = Counter(), [], 0.0
    harmonic_gap = 0
    for i in range(size):
        phi = corpus_map(target, i, seed=seed)
        v = classify(phi)
        cases[v.case if v.biharmonic else "not biharmonic"] += 1
        harmonic_gap += v.harmonic != v.biharmonic
        sup = float(np.max(np.abs(residual_closed(phi, default_probes(phi.m, seed=seed)))))
        if v.biharmonic != (sup <= TOL_MAP):
            mismatches.append(i)
        x = random_probes(phi.m, n_probes, np.random.default_rng([seed, i, 1]))
        gap = max(gap, float(np.max(np.abs(bitension_numeric(phi, x) - residual_closed(phi, x)))))
    return {"counts": dict(sorted(cases.items())), "verdict_mismatches": mismatches,
            "harmonic_vs_biharmonic_disagreements": harmonic_gap, "max_numeric_closed_gap": gap}


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--size", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--probes", type=int, default=5)
    args = ap.parse_args()
    out = {t: report(t, args.size, args.seed, args.probes) for t in TARGETS}
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
