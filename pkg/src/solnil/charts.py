"""Coordinate charts, Levi-Civita connection and curvature.

Array layouts (all functions broadcast over leading batch axes ``...``):

* ``g[..., i, j]``               metric components g_ij
* ``dg[..., k, i, j]``           partial_k g_ij
* ``ddg[..., l, k, i, j]``       partial_l partial_k g_ij
* ``christoffel[..., k, i, j]``  Gamma^k_ij
* ``riemann_mixed[..., l, k, i, j]`` components of R(d_i, d_j) d_k = R^l_kij d_l

Curvature sign convention: R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z
- nabla_[X,Y] Z, and the 4-tensor is R(X, Y, Z, W) = -g(R(X, Y)Z, W). Under
this convention R(X, Y, X, Y) is the sectional curvature of span{X, Y}, and
Sol has R_1212 = 1, R_1313 = R_2323 = -1 in its left-invariant frame.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import expr as ex
from .errors import DomainExceeded, NonOrthonormalFrame, ParseError, SingularMetric

Field = Callable[[np.ndarray], np.ndarray]

COND_MAX = 1e12
FRAME_TOL = 1e-8


@dataclass(frozen=True)
class ChartMetric:
    """A coordinate chart with closed-form metric and partial derivatives.

    ``guarded`` lists the coordinates subject to ``domain_bound``; ``None``
    means all of them. ``d3g`` (third partials) and ``frame`` (an orthonormal
    frame field, columns are the e_a) are optional.
    """

    name: str
    dim: int
    g: Field
    dg: Field
    ddg: Field
    domain_bound: float
    d3g: Optional[Field] = None
    frame: Optional[Field] = None
    guarded: Optional[tuple[int, ...]] = None

    def __repr__(self):
        return f"ChartMetric(name={self.name!r}, dim={self.dim})"


@dataclass(frozen=True)
class FrameField:
    """Orthonormal frame at a point; ``vectors[:, a]`` holds e_a in coordinates."""

    vectors: np.ndarray
    point: np.ndarray = field(default=None)


# ---------------------------------------------------------------------------
# built-in charts


def _sol_g(p):
    z = np.asarray(p, float)[..., 2]
    out = np.zeros(z.shape + (3, 3))
    out[..., 0, 0] = np.exp(2 * z)
    out[..., 1, 1] = np.exp(-2 * z)
    out[..., 2, 2] = 1.0
    return out


def _sol_dn(order):
    def f(p):
        z = np.asarray(p, float)[..., 2]
        out = np.zeros(z.shape + (3,) * (order + 2))
        idx = (Ellipsis,) + (2,) * order
        out[idx + (0, 0)] = 2.0**order * np.exp(2 * z)
        out[idx + (1, 1)] = (-2.0) ** order * np.exp(-2 * z)
        return out

    return f


def _sol_frame(p):
    z = np.asarray(p, float)[..., 2]
    out = np.zeros(z.shape + (3, 3))
    out[..., 0, 0] = np.exp(-z)
    out[..., 1, 1] = np.exp(z)
    out[..., 2, 2] = 1.0
    return out


def _nil_g(p):
    x = np.asarray(p, float)[..., 0]
    out = np.zeros(x.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0 + x**2
    out[..., 1, 2] = out[..., 2, 1] = -x
    out[..., 2, 2] = 1.0
    return out


def _nil_dg(p):
    x = np.asarray(p, float)[..., 0]
    out = np.zeros(x.shape + (3, 3, 3))
    out[..., 0, 1, 1] = 2 * x
    out[..., 0, 1, 2] = out[..., 0, 2, 1] = -1.0
    return out


def _nil_ddg(p):
    shape = np.shape(p)[:-1]
    out = np.zeros(shape + (3, 3, 3, 3))
    out[..., 0, 0, 1, 1] = 2.0
    return out


def _nil_d3g(p):
    return np.zeros(np.shape(p)[:-1] + (3,) * 5)


def _nil_frame(p):
    x = np.asarray(p, float)[..., 0]
    out = np.zeros(x.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = 1.0
    out[..., 2, 1] = x  # e2 = d2 + y1 d3
    out[..., 2, 2] = 1.0
    return out


@lru_cache(maxsize=None)
def sol_chart() -> ChartMetric:
    """Sol: exp(2 y3) dy1^2 + exp(-2 y3) dy2^2 + dy3^2, bound on y3 only."""
    return ChartMetric(
        name="sol", dim=3, g=_sol_g, dg=_sol_dn(1), ddg=_sol_dn(2), d3g=_sol_dn(3),
        domain_bound=30.0, frame=_sol_frame, guarded=(2,),
    )


@lru_cache(maxsize=None)
def nil_chart() -> ChartMetric:
    """Nil: dy1^2 + dy2^2 + (dy3 - y1 dy2)^2."""
    return ChartMetric(
        name="nil", dim=3, g=_nil_g, dg=_nil_dg, ddg=_nil_ddg, d3g=_nil_d3g,
        domain_bound=1e6, frame=_nil_frame,
    )


@lru_cache(maxsize=None)
def euclidean_chart(dim: int = 3) -> ChartMetric:
    if dim < 1:
        raise ValueError("dim must be positive")

    def const(order):
        def f(p):
            shape = np.shape(p)[:-1]
            if order == 0:
                return np.broadcast_to(np.eye(dim), shape + (dim, dim)).copy()
            return np.zeros(shape + (dim,) * (order + 2))

        return f

    return ChartMetric(
        name="euclidean", dim=dim, g=const(0), dg=const(1), ddg=const(2), d3g=const(3),
        domain_bound=1e6, frame=const(0),
    )


def get_chart(name: str, dim: int = 3) -> ChartMetric:
    """Resolve a built-in chart name or a path to a chart config file."""
    if name == "sol":
        return sol_chart()
    if name == "nil":
        return nil_chart()
    if name == "euclidean":
        return euclidean_chart(dim)
    path = Path(name)
    if path.suffix or path.exists():
        return load_chart(path)
    raise ParseError(f"unknown chart {name!r}")


# ---------------------------------------------------------------------------
# user-defined charts


def chart_from_expressions(name: str, dim: int, components: dict[tuple[int, int], str],
                           domain_bound: float = 1e6) -> ChartMetric:
    """Build a chart from ``{(i, j): expression}`` with 1-based indices.

    Missing entries are zero; an entry given once is mirrored across the
    diagonal. Partials up to third order come from symbolic differentiation.
    """
    trees: dict[tuple[int, int], ex.Expr] = {}
    for (i, j), text in components.items():
        if not (1 <= i <= dim and 1 <= j <= dim):
            raise ParseError(f"metric index g[{i}][{j}] out of range for dim={dim}")
        node = ex.parse(text, dim)
        key = (i - 1, j - 1)
        mirror = (j - 1, i - 1)
        if mirror in trees and mirror != key:
            probe = np.random.default_rng(0).uniform(-1, 1, size=(8, dim))
            if not np.allclose(trees[mirror].evaluate(probe), node.evaluate(probe)):
                raise ParseError(f"g[{i}][{j}] and g[{j}][{i}] disagree")
        trees[key] = node
        trees[mirror] = node

    def tree(i, j):
        return trees.get((i, j), ex.ZERO)

    def derive(node, order_vars):
        for v in order_vars:
            node = node.diff(v)
        return node

    def build(order):
        idx = list(np.ndindex(*(dim,) * order))
        table = {(d, i, j): derive(tree(i, j), d) for d in idx for i in range(dim) for j in range(dim)}

        def f(p):
            p = np.asarray(p, float)
            out = np.zeros(p.shape[:-1] + (dim,) * (order + 2))
            for (d, i, j), node in table.items():
                if node != ex.ZERO:
                    out[(Ellipsis,) + tuple(d) + (i, j)] = node.evaluate(p)
            return out

        return f

    return ChartMetric(
        name=name, dim=dim, g=build(0), dg=build(1), ddg=build(2), d3g=build(3),
        domain_bound=float(domain_bound),
    )


_GKEY = re.compile(r"^g\s*\[\s*(\d+)\s*\]\s*\[\s*(\d+)\s*\]$")


def parse_chart_config(text: str) -> ChartMetric:
    """Parse a TOML chart description.

    Components are given as ``"g[i][j]" = "<expr>"`` either at top level or in
    a ``[metric]`` table, or as nested tables ``[g.i] j = "<expr>"``.
    """
    import tomli

    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"chart config: {exc}") from exc
    try:
        name = str(doc["name"])
        dim = int(doc["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"chart config needs 'name' and integer 'dim': {exc}") from exc
    if dim < 1:
        raise ParseError("dim must be positive")
    comps: dict[tuple[int, int], str] = {}

    def collect(table):
        for key, val in table.items():
            m = _GKEY.match(str(key))
            if m:
                comps[(int(m.group(1)), int(m.group(2)))] = str(val)

    collect(doc)
    if isinstance(doc.get("metric"), dict):
        collect(doc["metric"])
    if isinstance(doc.get("g"), dict):
        for i, row in doc["g"].items():
            if not isinstance(row, dict):
                raise ParseError("nested g table must map i -> {j = expr}")
            for j, val in row.items():
                try:
                    comps[(int(i), int(j))] = str(val)
                except ValueError as exc:
                    raise ParseError(f"bad metric index g[{i}][{j}]") from exc
    if not comps:
        raise ParseError("chart config defines no metric components")
    bound = float(doc.get("domain_bound", 1e6))
    return chart_from_expressions(name, dim, comps, domain_bound=bound)


def load_chart(path) -> ChartMetric:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read chart config {path}: {exc}") from exc
    return parse_chart_config(text)


# ---------------------------------------------------------------------------
# evaluation


def _point(chart: ChartMetric, p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1:] != (chart.dim,):
        raise ValueError(f"point has shape {p.shape}, chart {chart.name} needs (..., {chart.dim})")
    return p


def out_of_domain(chart: ChartMetric, p) -> np.ndarray:
    """Boolean mask over batch axes: True where a guarded coordinate exceeds the bound."""
    p = _point(chart, p)
    axes = list(range(chart.dim)) if chart.guarded is None else list(chart.guarded)
    return np.any(~(np.abs(p[..., axes]) <= chart.domain_bound), axis=-1)


def check_domain(chart: ChartMetric, p) -> np.ndarray:
    p = _point(chart, p)
    if np.any(out_of_domain(chart, p)):
        raise DomainExceeded(f"point outside |y| <= {chart.domain_bound} for chart {chart.name}")
    return p


def metric_at(chart: ChartMetric, p) -> np.ndarray:
    """Metric components g_ij at ``p``."""
    p = check_domain(chart, p)
    return chart.g(p)


def scaled_condition(g: np.ndarray) -> np.ndarray:
    """Condition number of D^-1/2 g D^-1/2 with D = diag(g).

    Invariant under rescaling coordinates, so exp(+-2z) diagonals in Sol do
    not register as ill-conditioning.
    """
    d = np.diagonal(g, axis1=-2, axis2=-1)
    ok = np.all(d > 0, axis=-1) & np.all(np.isfinite(g), axis=(-1, -2))
    s = 1.0 / np.sqrt(np.where(ok[..., None], d, 1.0))
    scaled = np.where(ok[..., None, None], g * s[..., :, None] * s[..., None, :], np.eye(g.shape[-1]))
    return np.where(ok, np.linalg.cond(scaled), np.inf)


def _inverse(g: np.ndarray) -> np.ndarray:
    cond = scaled_condition(g)
    if np.any(~(cond <= COND_MAX)):
        raise SingularMetric(f"metric condition number {np.max(cond):.3g} exceeds {COND_MAX:g}")
    return np.linalg.inv(g)


def inverse_metric_at(chart: ChartMetric, p) -> np.ndarray:
    return _inverse(metric_at(chart, p))


def _first_kind(dg: np.ndarray) -> np.ndarray:
    # Gamma_{l,ij} = 1/2 (d_i g_jl + d_j g_il - d_l g_ij), layout [..., l, i, j]
    return 0.5 * (np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg)


def _levi_civita(g: np.ndarray, dg: np.ndarray) -> np.ndarray:
    ginv = _inverse(g)
    gam = np.einsum("...kl,...lij->...kij", ginv, _first_kind(dg))
    # enforce exact lower-index symmetry
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def christoffel_at(chart: ChartMetric, p) -> np.ndarray:
    """Gamma^k_ij at ``p``, layout ``[..., k, i, j]``."""
    p = check_domain(chart, p)
    return _levi_civita(chart.g(p), chart.dg(p))


def _christoffel_jet(chart: ChartMetric, p: np.ndarray, order: int):
    """Christoffels and their first (and optionally second) partials."""
    g = chart.g(p)
    dg = chart.dg(p)
    ddg = chart.ddg(p)
    ginv = _inverse(g)
    low = _first_kind(dg)
    dlow = np.stack([_first_kind(ddg[..., m, :, :, :]) for m in range(chart.dim)], axis=-4)
    # d_m g^{-1} = -g^{-1} (d_m g) g^{-1}
    dginv = -np.einsum("...ka,...mab,...bl->...mkl", ginv, dg, ginv)
    gam = np.einsum("...kl,...lij->...kij", ginv, low)
    dgam = np.einsum("...mkl,...lij->...mkij", dginv, low) + np.einsum("...kl,...mlij->...mkij", ginv, dlow)
    out = [gam, dgam]
    if order >= 2:
        if chart.d3g is None:
            raise NotImplementedError(f"chart {chart.name} has no third partials")
        d3g = chart.d3g(p)
        ddlow = np.stack(
            [np.stack([_first_kind(d3g[..., n, m, :, :, :]) for m in range(chart.dim)], axis=-4)
             for n in range(chart.dim)], axis=-5)
        # d_n d_m g^{-1} = g^{-1}(d_n g g^{-1} d_m g + d_m g g^{-1} d_n g - d_n d_m g) g^{-1}
        inner = (np.einsum("...nab,...bc,...mcd->...nmad", dg, ginv, dg)
                 + np.einsum("...mab,...bc,...ncd->...nmad", dg, ginv, dg) - ddg)
        ddginv = np.einsum("...ka,...nmad,...dl->...nmkl", ginv, inner, ginv)
        ddgam = (np.einsum("...nmkl,...lij->...nmkij", ddginv, low)
                 + np.einsum("...mkl,...nlij->...nmkij", dginv, dlow)
                 + np.einsum("...nkl,...mlij->...nmkij", dginv, dlow)
                 + np.einsum("...kl,...nmlij->...nmkij", ginv, ddlow))
        out.append(ddgam)
    return out


def christoffel_derivative_at(chart: ChartMetric, p) -> np.ndarray:
    """partial_l Gamma^k_ij, layout ``[..., l, k, i, j]``, from closed-form partials."""
    p = check_domain(chart, p)
    return _christoffel_jet(chart, p, 1)[1]


def christoffel_second_derivative_at(chart: ChartMetric, p) -> np.ndarray:
    """partial_n partial_m Gamma^k_ij, layout ``[..., n, m, k, i, j]``; needs ``d3g``."""
    p = check_domain(chart, p)
    return _christoffel_jet(chart, p, 2)[2]


def riemann_mixed_at(chart: ChartMetric, p) -> np.ndarray:
    """R^l_kij = d_i Gamma^l_kj - d_j Gamma^l_ki + Gamma^l_it Gamma^t_kj - Gamma^l_jt Gamma^t_ki.

    Layout ``[..., l, k, i, j]``.
    """
    p = check_domain(chart, p)
    gam, dgam = _christoffel_jet(chart, p, 1)
    deriv = np.einsum("...ilkj->...lkij", dgam)
    quad = np.einsum("...lit,...tkj->...lkij", gam, gam)
    r = deriv - np.swapaxes(deriv, -1, -2) + quad - np.swapaxes(quad, -1, -2)
    return r


def gram_schmidt_frame(g: np.ndarray) -> np.ndarray:
    """Orthonormalize the coordinate basis against ``g`` (columns are e_a)."""
    lower = np.linalg.cholesky(g)
    return np.swapaxes(np.linalg.inv(lower), -1, -2)


def frame_at(chart: ChartMetric, p) -> FrameField:
    """The chart's orthonormal frame at ``p`` (Gram-Schmidt when none is built in)."""
    p = check_domain(chart, p)
    vec = chart.frame(p) if chart.frame is not None else gram_schmidt_frame(chart.g(p))
    return FrameField(vectors=vec, point=p)


def frame_error(chart: ChartMetric, frame: FrameField, p) -> float:
    g = metric_at(chart, p)
    e = frame.vectors
    gram = np.einsum("...ia,...ij,...jb->...ab", e, g, e)
    return float(np.max(np.abs(gram - np.eye(chart.dim))))


def riemann_frame_at(chart: ChartMetric, frame: FrameField | None, p) -> np.ndarray:
    """R_abcd = R(e_a, e_b, e_c, e_d) = -g(R(e_a, e_b) e_c, e_d).

    ``frame=None`` uses :func:`frame_at`.
    """
    p = check_domain(chart, p)
    if frame is None:
        frame = frame_at(chart, p)
    err = frame_error(chart, frame, p)
    if err > FRAME_TOL:
        raise NonOrthonormalFrame(f"frame deviates from orthonormal by {err:.3g}")
    e = frame.vectors
    g = chart.g(p)
    rm = riemann_mixed_at(chart, p)
    # lowered: R_{m k i j} = g_ml R^l_kij ; R(d_i, d_j, d_k, d_m) = -R_{m k i j}
    low = np.einsum("...ml,...lkij->...mkij", g, rm)
    return -np.einsum("...mkij,...ia,...jb,...kc,...md->...abcd", low, e, e, e, e)


def fd_oracle_christoffel(chart: ChartMetric, p, h: float) -> np.ndarray:
    """Christoffels from central differences of :func:`metric_at` alone."""
    if not h > 0:
        raise ValueError("step must be positive")
    p = check_domain(chart, p)
    n = chart.dim
    dg = np.zeros(p.shape[:-1] + (n, n, n))
    for k in range(n):
        step = np.zeros(n)
        step[k] = h
        dg[..., k, :, :] = (metric_at(chart, p + step) - metric_at(chart, p - step)) / (2 * h)
    return _levi_civita(metric_at(chart, p), dg)


def lower(chart: ChartMetric, p, v) -> np.ndarray:
    return np.einsum("...ij,...j->...i", chart.g(np.asarray(p, float)), v)


def inner(chart: ChartMetric, p, u, v) -> np.ndarray:
    return np.einsum("...i,...ij,...j->...", u, chart.g(np.asarray(p, float)), v)


def to_frame(vectors: np.ndarray, g: np.ndarray, coord_vec: np.ndarray) -> np.ndarray:
    """Frame components of a coordinate vector: a_a = g(V, e_a)."""
    return np.einsum("...ia,...ij,...j->...a", vectors, g, coord_vec)


def from_frame(vectors: np.ndarray, frame_vec: np.ndarray) -> np.ndarray:
    return np.einsum("...ia,...a->...i", vectors, frame_vec)


def nonzero_entries(arr: np.ndarray, tol: float = 1e-12) -> list[tuple[tuple[int, ...], float]]:
    """1-based index tuples and values of entries with |value| > tol."""
    return [(tuple(int(i) + 1 for i in idx), float(arr[idx]))
            for idx in zip(*np.nonzero(np.abs(arr) > tol))]


__all__: Sequence[str] = [
    "ChartMetric", "FrameField", "sol_chart", "nil_chart", "euclidean_chart", "get_chart",
    "chart_from_expressions", "parse_chart_config", "load_chart", "metric_at",
    "inverse_metric_at", "christoffel_at", "christoffel_derivative_at",
    "christoffel_second_derivative_at", "riemann_mixed_at", "frame_at", "riemann_frame_at",
    "fd_oracle_christoffel", "check_domain", "out_of_domain", "nonzero_entries",
]
