"""Frenet curves in 3-dimensional charts and biharmonic-curve residuals.

Frames travel with the trajectory in two forms: coordinate components for
integration, and components in the chart's orthonormal frame {e1, e2, e3}
for reporting (for Sol, T = T1 e1 + T2 e2 + T3 e3 with e1 = exp(-z) d_x,
e2 = exp(z) d_y, e3 = d_z).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .charts import (
    ChartMetric, _first_kind, check_domain, frame_at, out_of_domain,
    riemann_frame_at, riemann_mixed_at, to_frame, from_frame,
)
from .errors import (
    ArcLengthViolation, DomainExceeded, GeodesicDegenerate, InsufficientSamples,
    NonOrthonormalFrame, WrongChart,
)
from .report import BIHARMONIC, ResidualReport

K_MIN = 1e-7
TOL_FRAME = 1e-4
TOL_DIRECT = 1e-3
TOL_SOL = 1e-4
ORTHO_TOL = 1e-8

Profile = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class FrenetState:
    s: float
    position: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    k: float = 0.0
    tau: float = 0.0

    @property
    def frame(self) -> np.ndarray:
        return np.stack([self.T, self.N, self.B], axis=-1)


@dataclass
class CurveTrajectory:
    """Uniform arc-length samples of a curve with its Frenet apparatus.

    ``T, N, B`` are orthonormal-frame components, shape (n, 3). ``margin`` is
    the number of boundary samples at each end whose values came from
    lower-order stencils; residuals skip them. ``drift`` is the largest
    pre-correction deviation of the frame Gram matrix from the identity.
    """

    chart: ChartMetric
    ds: float
    s: np.ndarray
    position: np.ndarray
    T: np.ndarray
    N: np.ndarray
    B: np.ndarray
    k: np.ndarray
    tau: np.ndarray
    degenerate: np.ndarray
    margin: int = 0
    drift: float = 0.0

    def __len__(self):
        return len(self.s)

    def __getitem__(self, i) -> FrenetState:
        return FrenetState(float(self.s[i]), self.position[i], self.T[i], self.N[i], self.B[i],
                           float(self.k[i]), float(self.tau[i]))

    @property
    def frame_vectors(self) -> np.ndarray:
        return frame_at(self.chart, self.position).vectors

    def coordinate(self, name: str) -> np.ndarray:
        """Coordinate components of ``T``, ``N`` or ``B``."""
        return from_frame(self.frame_vectors, getattr(self, name))

    def speed_error(self) -> float:
        tc = self.coordinate("T")
        g = self.chart.g(self.position)
        return float(np.max(np.abs(np.sqrt(np.einsum("ni,nij,nj->n", tc, g, tc)) - 1.0)))

    def to_csv(self, path) -> None:
        header = ["s", "x", "y", "z", "T1", "T2", "T3", "N1", "N2", "N3", "B1", "B2", "B3", "k", "tau"]
        rows = np.column_stack([self.s, self.position, self.T, self.N, self.B, self.k, self.tau])
        _atomic_write_rows(path, header, rows)


def _atomic_write_rows(path, header, rows):
    import os
    import tempfile
    from pathlib import Path

    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Return (s, positions) from a trajectory CSV with columns s, x, y, z."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = [(float(r["s"]), float(r["x"]), float(r["y"]), float(r["z"])) for r in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 4)
    return arr[:, 0], arr[:, 1:]


# ---------------------------------------------------------------------------
# frames


def euler_frame(a: float, b: float, c: float) -> np.ndarray:
    """ZYZ rotation matrix; its columns serve as (T, N, B)."""
    ca, sa, cb, sb, cc, sc = (math.cos(a), math.sin(a), math.cos(b), math.sin(b),
                              math.cos(c), math.sin(c))
    rz1 = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz2 = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rz1 @ ry @ rz2


def initial_state(T=None, N=None, position=(0.0, 0.0, 0.0), euler=None) -> FrenetState:
    """Initial Frenet state at ``position``.

    Either Euler angles, or a tangent ``T`` (frame components) with an
    optional normal hint completed by Gram-Schmidt; B = T x N.
    """
    if euler is not None:
        f = euler_frame(*euler)
        return FrenetState(0.0, np.asarray(position, float), f[:, 0], f[:, 1], f[:, 2])
    t = np.asarray((1.0, 0.0, 0.0) if T is None else T, dtype=float)
    t = t / np.linalg.norm(t)
    if N is None:
        axes = np.eye(3)
        hint = axes[np.argmin(np.abs(t))]
    else:
        hint = np.asarray(N, dtype=float)
    n = hint - (hint @ t) * t
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        raise NonOrthonormalFrame("normal hint is parallel to the tangent")
    n = n / norm
    return FrenetState(0.0, np.asarray(position, float), t, n, np.cross(t, n))


def _check_initial(state: FrenetState) -> None:
    f = state.frame
    err = np.max(np.abs(f.T @ f - np.eye(3)))
    if err > ORTHO_TOL:
        raise NonOrthonormalFrame(f"initial frame deviates from orthonormal by {err:.3g}")
    if np.linalg.det(f) < 0:
        raise NonOrthonormalFrame("initial frame must be positively oriented (B = T x N)")


# ---------------------------------------------------------------------------
# integration


def _connection(chart: ChartMetric, p: np.ndarray) -> np.ndarray:
    # Unchecked Christoffels for the integrator's inner loop.
    g = chart.g(p)
    gam = np.einsum("...kl,...lij->...kij", np.linalg.inv(g), _first_kind(chart.dg(p)))
    return gam


def _frenet_rhs(chart, Y, k, tau):
    p, T, N, B = Y[..., 0, :], Y[..., 1, :], Y[..., 2, :], Y[..., 3, :]
    gam = _connection(chart, p)
    gT = np.einsum("...kij,...i->...kj", gam, T)

    def cov(V):
        return np.einsum("...kj,...j->...k", gT, V)

    return np.stack([T, k * N - cov(T), -k * T + tau * B - cov(N), -tau * N - cov(B)], axis=-2)


def _gram(chart, Y):
    g = chart.g(Y[..., 0, :])
    F = Y[..., 1:, :]
    return np.einsum("...ai,...ij,...bj->...ab", F, g, F)


def _reorthonormalize(chart, Y):
    g = chart.g(Y[..., 0, :])

    def ip(u, v):
        return np.einsum("...i,...ij,...j->...", u, g, v)[..., None]

    T, N, B = Y[..., 1, :], Y[..., 2, :], Y[..., 3, :]
    T = T / np.sqrt(ip(T, T))
    N = N - ip(N, T) * T
    N = N / np.sqrt(ip(N, N))
    B = B - ip(B, T) * T
    B = B - ip(B, N) * N
    B = B / np.sqrt(ip(B, B))
    return np.stack([Y[..., 0, :], T, N, B], axis=-2)


def _as_profile(v: Profile) -> Callable[[float], float]:
    if callable(v):
        return v
    c = float(v)
    return lambda s: c


def _rk4(chart, Y0, k_fn, tau_fn, ds, steps, reorth_every=100, on_step=None,
         mask_domain=False):
    """Fixed-step RK4 on (position, T, N, B) in coordinates.

    ``k_fn``/``tau_fn`` map arc length to arrays broadcastable to the batch.
    Returns (final state, max pre-correction drift, exceeded mask).
    """
    Y = np.array(Y0, dtype=float)
    batch = Y.shape[:-2]
    exceeded = np.zeros(batch, dtype=bool)
    drift = 0.0
    eye = np.eye(3)
    if on_step is not None:
        on_step(0, Y, exceeded)
    for n in range(steps):
        s = n * ds
        k1, t1 = k_fn(s), tau_fn(s)
        kh, th = k_fn(s + ds / 2), tau_fn(s + ds / 2)
        k2, t2 = k_fn(s + ds), tau_fn(s + ds)
        a = _frenet_rhs(chart, Y, k1, t1)
        b = _frenet_rhs(chart, Y + 0.5 * ds * a, kh, th)
        c = _frenet_rhs(chart, Y + 0.5 * ds * b, kh, th)
        d = _frenet_rhs(chart, Y + ds * c, k2, t2)
        Ynew = Y + ds / 6.0 * (a + 2 * b + 2 * c + d)
        last = n + 1 == steps
        if reorth_every and ((n + 1) % reorth_every == 0 or last):
            dev = np.abs(_gram(chart, Ynew) - eye)
            drift = max(drift, float(np.max(dev[~exceeded])) if np.any(~exceeded) else 0.0)
            Ynew = _reorthonormalize(chart, Ynew)
        elif not reorth_every and (last or (n + 1) % 100 == 0):
            dev = np.abs(_gram(chart, Ynew) - eye)
            drift = max(drift, float(np.max(dev[~exceeded])) if np.any(~exceeded) else 0.0)
        bad = out_of_domain(chart, Ynew[..., 0, :]) | ~np.all(np.isfinite(Ynew), axis=(-1, -2))
        if np.any(bad & ~exceeded):
            if not mask_domain:
                raise DomainExceeded(f"curve left the domain of chart {chart.name} at s={s + ds:.6g}")
            exceeded |= bad
        if np.any(exceeded):
            Ynew[exceeded] = Y[exceeded]
        Y = Ynew
        if on_step is not None:
            on_step(n + 1, Y, exceeded)
    return Y, drift, exceeded


def integrate_frenet(chart: ChartMetric, k: Profile, tau: Profile, initial: FrenetState,
                     s_max: float, steps: int, reorth_every: Optional[int] = 100,
                     k_min: float = K_MIN) -> CurveTrajectory:
    """Integrate gamma' = T together with the Frenet equations.

    ``k`` and ``tau`` are constants or callables of arc length. The frame is
    re-orthonormalized every ``reorth_every`` steps (``None`` disables it).
    """
    if chart.dim != 3:
        raise ValueError("curves need a 3-dimensional chart")
    if steps < 2:
        raise InsufficientSamples("need at least 2 steps")
    if not s_max > 0:
        raise ValueError("s_max must be positive")
    _check_initial(initial)
    k_fn, tau_fn = _as_profile(k), _as_profile(tau)
    p0 = check_domain(chart, initial.position)
    E0 = frame_at(chart, p0).vectors
    Y0 = np.stack([p0, E0 @ initial.T, E0 @ initial.N, E0 @ initial.B])
    ds = s_max / steps
    samples = np.empty((steps + 1, 4, 3))

    def record(n, Y, _):
        samples[n] = Y

    _, drift, _ = _rk4(chart, Y0, k_fn, tau_fn, ds, steps, reorth_every, record)
    s = np.arange(steps + 1) * ds
    pos = samples[:, 0, :]
    E = frame_at(chart, pos).vectors
    g = chart.g(pos)
    T, N, B = (to_frame(E, g, samples[:, i, :]) for i in (1, 2, 3))
    kk = np.array([k_fn(v) for v in s], dtype=float)
    tt = np.array([tau_fn(v) for v in s], dtype=float)
    if np.any(kk < 0):
        raise ValueError("curvature must be nonnegative")
    return CurveTrajectory(chart, ds, s, pos, T, N, B, kk, tt, kk < k_min, margin=0, drift=drift)


def integrate_helix(chart: ChartMetric, k: float, tau: float, initial: FrenetState,
                    s_max: float, steps: int, reorth_every: Optional[int] = 100) -> CurveTrajectory:
    """Curve with constant curvature ``k`` and torsion ``tau`` from ``initial``."""
    if k < 0:
        raise ValueError("curvature must be nonnegative")
    return integrate_frenet(chart, float(k), float(tau), initial, s_max, steps, reorth_every)


# ---------------------------------------------------------------------------
# finite differences in arc length


def d_ds(f: np.ndarray, ds: float) -> np.ndarray:
    """First derivative: 4th-order central inside, 2nd-order at the two end samples."""
    f = np.asarray(f, dtype=float)
    if len(f) < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {len(f)}")
    out = np.empty_like(f)
    out[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * ds)
    out[1] = (f[2] - f[0]) / (2 * ds)
    out[-2] = (f[-1] - f[-3]) / (2 * ds)
    out[0] = (-3 * f[0] + 4 * f[1] - f[2]) / (2 * ds)
    out[-1] = (3 * f[-1] - 4 * f[-2] + f[-3]) / (2 * ds)
    return out


def d2_ds2(f: np.ndarray, ds: float) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if len(f) < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {len(f)}")
    out = np.empty_like(f)
    h2 = ds * ds
    out[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h2)
    out[1] = (f[0] - 2 * f[1] + f[2]) / h2
    out[-2] = (f[-3] - 2 * f[-2] + f[-1]) / h2
    out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h2
    out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h2
    return out


def _interior(n: int, margin: int) -> slice:
    if n - 2 * margin < 1:
        raise InsufficientSamples(f"{n} samples leave nothing inside a boundary margin of {margin}")
    return slice(margin, n - margin)


def _covariant_ds(chart, pos, T, V, ds):
    gam = _connection(chart, pos)
    return d_ds(V, ds) + np.einsum("nkij,ni,nj->nk", gam, T, V)


# ---------------------------------------------------------------------------
# Frenet apparatus from positions


def frenet_apparatus(chart: ChartMetric, positions, ds: float, k_min: float = K_MIN,
                     arc_tol: float = 1e-4, strict: bool = False) -> CurveTrajectory:
    """Recover T, N, B, k, tau from arc-length samples of a curve.

    Samples with k < ``k_min`` are flagged in ``degenerate`` and carry NaN
    normal, binormal and torsion; ``strict=True`` raises instead.
    """
    pos = check_domain(chart, np.asarray(positions, dtype=float))
    n = len(pos)
    if n < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {n}")
    g = chart.g(pos)
    E = frame_at(chart, pos).vectors
    Tc = d_ds(pos, ds)
    speed = np.sqrt(np.einsum("ni,nij,nj->n", Tc, g, Tc))
    inner_slice = _interior(n, 2)
    err = float(np.max(np.abs(speed[inner_slice] - 1.0)))
    if err > arc_tol:
        raise ArcLengthViolation(f"samples deviate from unit speed by {err:.3g}")
    V1 = _covariant_ds(chart, pos, Tc, Tc, ds)
    k = np.sqrt(np.einsum("ni,nij,nj->n", V1, g, V1))
    degenerate = k < k_min
    if strict and np.any(degenerate):
        raise GeodesicDegenerate(f"{int(degenerate.sum())} samples below k_min={k_min:g}")
    with np.errstate(invalid="ignore", divide="ignore"):
        Nc = np.where(degenerate[:, None], np.nan, V1 / k[:, None])
    T = to_frame(E, g, Tc)
    N = to_frame(E, g, Nc)
    B = np.cross(T, N)
    Bc = from_frame(E, B)
    dN = _covariant_ds(chart, pos, Tc, Nc, ds)
    tau = np.einsum("ni,nij,nj->n", dN, g, Bc)
    return CurveTrajectory(chart, ds, np.arange(n) * ds, pos, T, N, B, k, tau, degenerate,
                           margin=6, drift=0.0)


# ---------------------------------------------------------------------------
# residuals


def _frame_curvature(traj: CurveTrajectory) -> np.ndarray:
    return riemann_frame_at(traj.chart, None, traj.position)


def biharmonic_residual_frame(traj: CurveTrajectory, tol: float = TOL_FRAME) -> ResidualReport:
    """Residuals of the Frenet-frame biharmonic system.

    r1 = k k', r2 = k'' - k^3 - k tau^2 + k R(T,N,T,N),
    r3 = 2 k' tau + k tau' + k R(T,N,T,B).
    """
    n = len(traj)
    if n < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {n}")
    if np.all(traj.degenerate):
        sl = _interior(n, traj.margin + 2)
        k = traj.k
        dk, ddk = d_ds(k, traj.ds), d2_ds2(k, traj.ds)
        per = np.column_stack([k * dk, ddk - k**3, np.zeros(n)])[sl]
        return ResidualReport.build(per, traj.s[sl], tol, "frame", flags=("geodesic",))
    deg = traj.degenerate
    k = traj.k
    tau = np.where(deg, 0.0, np.nan_to_num(traj.tau))
    dk, ddk, dtau = d_ds(k, traj.ds), d2_ds2(k, traj.ds), d_ds(tau, traj.ds)
    R = _frame_curvature(traj)
    T = traj.T
    N = np.where(deg[:, None], 0.0, np.nan_to_num(traj.N))
    B = np.where(deg[:, None], 0.0, np.nan_to_num(traj.B))
    rtntn = np.einsum("nabcd,na,nb,nc,nd->n", R, T, N, T, N)
    rtntb = np.einsum("nabcd,na,nb,nc,nd->n", R, T, N, T, B)
    r1 = k * dk
    r2 = ddk - k**3 - k * tau**2 + k * rtntn
    r3 = 2 * dk * tau + k * dtau + k * rtntb
    sl = _interior(n, traj.margin + 2)
    per = np.column_stack([r1, r2, r3])[sl]
    return ResidualReport.build(per, traj.s[sl], tol, "frame")


def biharmonic_residual_direct(traj: CurveTrajectory, tol: float = TOL_DIRECT) -> ResidualReport:
    """Residual of nabla_T^3 T - R(T, nabla_T T) T from differenced frame data.

    Components are reported in the chart's orthonormal frame.
    """
    n = len(traj)
    if n < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {n}")
    chart = traj.chart
    pos = traj.position
    E = frame_at(chart, pos).vectors
    g = chart.g(pos)
    # unit-normalize: periodic re-orthonormalization only rescales T, and a
    # rescaling jump would be amplified by the nested differences
    T = traj.T / np.linalg.norm(traj.T, axis=1, keepdims=True)
    Tc = from_frame(E, T)
    V1 = _covariant_ds(chart, pos, Tc, Tc, traj.ds)
    V2 = _covariant_ds(chart, pos, Tc, V1, traj.ds)
    V3 = _covariant_ds(chart, pos, Tc, V2, traj.ds)
    Rm = riemann_mixed_at(chart, pos)
    curv = np.einsum("nlkij,ni,nj,nk->nl", Rm, Tc, V1, Tc)
    res = to_frame(E, g, V3 - curv)
    sl = _interior(n, traj.margin + 6)
    norms = np.linalg.norm(res[sl], axis=1)
    flags = ("geodesic",) if np.all(traj.degenerate) else ()
    return ResidualReport.build(res[sl], traj.s[sl], tol, "direct", flags=flags, norms=norms)


def sol_condition_terms(k, tau, dk, dtau, N3, B3) -> np.ndarray:
    """Pointwise |k'|, |k^2 + tau^2 - 2 B3^2 + 1|, |tau' - 2 N3 B3|."""
    return np.stack([np.abs(dk), np.abs(k**2 + tau**2 - 2 * B3**2 + 1), np.abs(dtau - 2 * N3 * B3)],
                    axis=-1)


def sol_condition_residual(traj: CurveTrajectory, tol: float = TOL_SOL,
                           k_min: float = K_MIN) -> ResidualReport:
    """Residuals of the Sol characterization of non-geodesic biharmonic curves.

    Geodesics (sup k < ``k_min``) are biharmonic and flagged ``geodesic``.
    """
    if traj.chart.name != "sol":
        raise WrongChart(f"Sol condition needs the sol chart, got {traj.chart.name!r}")
    n = len(traj)
    if n < 5:
        raise InsufficientSamples(f"need at least 5 samples, got {n}")
    sl = _interior(n, traj.margin + 2)
    k = traj.k
    if np.max(np.abs(k[sl])) < k_min:
        per = np.zeros((sl.stop - sl.start, 3))
        return ResidualReport.build(per, traj.s[sl], tol, "sol_condition", flags=("geodesic",),
                                    force=BIHARMONIC)
    deg = traj.degenerate
    tau = np.where(deg, 0.0, np.nan_to_num(traj.tau))
    N3 = np.where(deg, 0.0, np.nan_to_num(traj.N[:, 2]))
    B3 = np.where(deg, 0.0, np.nan_to_num(traj.B[:, 2]))
    terms = sol_condition_terms(k, tau, d_ds(k, traj.ds), d_ds(tau, traj.ds), N3, B3)
    flags = ("partially_degenerate",) if np.any(deg[sl]) else ()
    return ResidualReport.build(terms[sl], traj.s[sl], tol, "sol_condition", flags=flags)
