"""Grid scan over Sol helices for the biharmonic characterization residual.

Each cell integrates one helix (k, tau, initial orientation) and tracks the
pointwise terms |k'|, |k^2 + tau^2 - 2 B3^2 + 1|, |tau' - 2 N3 B3| along it.
A helix is biharmonic only if all terms vanish for every s, so the cell
residual is the sup over s of the largest term (the same number
``sol_condition_residual`` reports as ``sup_norm``). The smallest pointwise
value along the curve is kept alongside for diagnostics.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .charts import ChartMetric, frame_at, sol_chart, to_frame
from .curves import _atomic_write_rows, _rk4, euler_frame
from .errors import WrongChart

FLAG_OK = "ok"
FLAG_DEGENERATE = "geodesic_degenerate"
FLAG_DOMAIN = "domain_exceeded"

CSV_COLUMNS = ["k", "tau", "euler_a", "euler_b", "euler_c", "min_residual", "flag"]


def default_k_grid() -> list[float]:
    return [round(0.1 * i, 10) for i in range(1, 21)]


def orientation_grid(n: int = 4) -> list[tuple[float, float, float]]:
    """Cell-centred ZYZ Euler angles: n values each of a, c in [0, 2pi), b in [0, pi)."""
    a_vals = [2 * math.pi * (i + 0.5) / n for i in range(n)]
    b_vals = [math.pi * (i + 0.5) / n for i in range(n)]
    return [(a, b, c) for a in a_vals for b in b_vals for c in a_vals]


@dataclass(frozen=True)
class ScanCell:
    k: float
    tau: float
    euler: tuple[float, float, float]
    residual: float
    pointwise_min: float
    flag: str


@dataclass
class ScanReport:
    cells: list[ScanCell]
    threshold: float
    s_max: float
    steps: int

    @property
    def ok_cells(self) -> list[ScanCell]:
        return [c for c in self.cells if c.flag == FLAG_OK]

    @property
    def global_min(self) -> float:
        vals = [c.residual for c in self.ok_cells]
        return min(vals) if vals else math.nan

    @property
    def n_below(self) -> int:
        return sum(1 for c in self.ok_cells if not c.residual > self.threshold)

    @property
    def passed(self) -> bool:
        return bool(self.ok_cells) and self.n_below == 0

    def flag_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.cells:
            out[c.flag] = out.get(c.flag, 0) + 1
        return dict(sorted(out.items()))

    def rows(self):
        for c in self.cells:
            yield [c.k, c.tau, c.euler[0], c.euler[1], c.euler[2], c.residual, c.flag]

    def to_csv(self, path) -> None:
        _atomic_write_rows(path, CSV_COLUMNS, list(self.rows()))

    def summary(self) -> dict:
        return {
            "cells": len(self.cells),
            "flags": self.flag_counts(),
            "global_min_residual": self.global_min,
            "threshold": self.threshold,
            "cells_below_threshold": self.n_below,
            "s_max": self.s_max,
            "steps": self.steps,
            "passed": self.passed,
        }


def _scan_chunk(chart: ChartMetric, ks, taus, frames, s_max, steps):
    """Integrate a batch of helices from the origin, streaming the residual terms."""
    n = len(ks)
    ds = s_max / steps
    p0 = np.zeros((n, 3))
    E0 = frame_at(chart, p0).vectors
    Y0 = np.concatenate([p0[:, None, :], np.einsum("nia,nab->nbi", E0, frames)], axis=1)
    kk = np.asarray(ks, float)[:, None]
    tt = np.asarray(taus, float)[:, None]
    sup = np.zeros(n)
    low = np.full(n, np.inf)
    const_k = (kk[:, 0] ** 2 + tt[:, 0] ** 2 + 1.0)

    def observe(i, Y, exceeded):
        # boundary samples are skipped, as in sol_condition_residual
        if i < 2 or i > steps - 2:
            return
        pos = Y[:, 0, :]
        E = frame_at(chart, pos).vectors
        g = chart.g(pos)
        N3 = to_frame(E, g, Y[:, 2, :])[:, 2]
        B3 = to_frame(E, g, Y[:, 3, :])[:, 2]
        # k' = tau' = 0 exactly for constant profiles
        term = np.maximum(np.abs(const_k - 2 * B3**2), np.abs(2 * N3 * B3))
        live = ~exceeded
        np.maximum(sup, np.where(live, term, sup), out=sup)
        np.minimum(low, np.where(live, term, low), out=low)

    _, _, exceeded = _rk4(chart, Y0, lambda s: kk, lambda s: tt, ds, steps,
                          reorth_every=100, on_step=observe, mask_domain=True)
    return sup, low, exceeded


def helix_scan(k_grid: Sequence[float], tau_grid: Sequence[float],
               orientation_grid_: Optional[Sequence[tuple[float, float, float]]] = None,
               s_max: float = 10.0, steps: int = 1000, threshold: float = 1e-2,
               k_degenerate: float = 1e-5, workers: int = 1, chunk: int = 4096,
               chart: Optional[ChartMetric] = None) -> ScanReport:
    """Scan helices over the (k, tau, orientation) grid in Sol.

    Cells with k below ``k_degenerate`` are flagged as near-geodesic; cells
    whose curve leaves the chart domain are flagged and skipped. Neither kind
    enters the global minimum. Output order and values do not depend on
    ``workers``.
    """
    chart = sol_chart() if chart is None else chart
    if chart.name != "sol":
        raise WrongChart("helix scan is defined for the sol chart")
    k_grid = [float(k) for k in k_grid]
    tau_grid = [float(t) for t in tau_grid]
    orients = orientation_grid() if orientation_grid_ is None else [tuple(map(float, o)) for o in orientation_grid_]
    if not k_grid or not tau_grid or not orients:
        raise ValueError("scan grids must be nonempty")
    if any(not k > 0 for k in k_grid):
        raise ValueError("all k in the grid must be positive")
    if steps < 5:
        raise ValueError("need at least 5 steps")
    params = [(k, t, o) for k in k_grid for t in tau_grid for o in orients]
    frames = np.array([euler_frame(*o) for _, _, o in params])
    ks = np.array([p[0] for p in params])
    ts = np.array([p[1] for p in params])
    bounds = [(i, min(i + chunk, len(params))) for i in range(0, len(params), chunk)]

    def run(b):
        lo, hi = b
        return _scan_chunk(chart, ks[lo:hi], ts[lo:hi], frames[lo:hi], s_max, steps)

    if workers and workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, bounds))
    else:
        results = [run(b) for b in bounds]
    sup = np.concatenate([r[0] for r in results])
    low = np.concatenate([r[1] for r in results])
    exceeded = np.concatenate([r[2] for r in results])
    cells = []
    for i, (k, t, o) in enumerate(params):
        if exceeded[i]:
            flag = FLAG_DOMAIN
        elif k < k_degenerate:
            flag = FLAG_DEGENERATE
        else:
            flag = FLAG_OK
        cells.append(ScanCell(k, t, o, float(sup[i]), float(low[i]), flag))
    return ScanReport(cells=cells, threshold=threshold, s_max=s_max, steps=steps)
