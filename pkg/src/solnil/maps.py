"""Linear maps from Euclidean m-space into Sol or Nil: tension, bitension, classification.

A linear map is phi(x) = (A1.x, A2.x, A3.x). Its differential is constant, so
with Q = A A^T (Q[a, b] = A^a . A^b) the tension is tau^s = Gamma^s_ab(phi(x)) Q^ab
and the bitension of a map out of flat space is

    Lap tau^s + <grad tau^a, A^b> Gamma^s_ab + <A^b, grad(tau^a Gamma^s_ab)>
        + Q^br tau^a Gamma^n_ab Gamma^s_nr - tau^n Q^ab R^s_ban.

Two closed-form specializations (one per target) are kept next to the
generic evaluator so each can check the other.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .charts import (ChartMetric, _christoffel_jet, check_domain, christoffel_at, get_chart,
                     riemann_mixed_at)
from .errors import ParseError, StepTooLarge, WrongChart
from .report import ResidualReport

TARGETS = ("sol", "nil")
EPS_CLASS = 1e-12
TOL_MAP = 1e-8
H_MAX = 1e-2

SOL_CASES = ("S-i", "S-ii")
NIL_CASES = ("N-i", "N-ii", "N-iii")
NO_CASE = "none"


@dataclass(frozen=True)
class LinearMap:
    """phi(x) = rows @ x with ``rows`` of shape (3, m)."""

    rows: np.ndarray
    target: str

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim == 1:
            rows = rows[:, None]
        if rows.ndim != 2 or rows.shape[0] != 3 or rows.shape[1] < 1:
            raise ValueError(f"rows must have shape (3, m) with m >= 1, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("map entries must be finite")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}, got {self.target!r}")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_rows(cls, target: str, A1, A2, A3) -> "LinearMap":
        A1, A2, A3 = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (A1, A2, A3))
        if not (A1.shape == A2.shape == A3.shape) or A1.ndim != 1:
            raise ValueError("A1, A2, A3 must be vectors of equal length")
        return cls(np.stack([A1, A2, A3]), target)

    @property
    def m(self) -> int:
        return self.rows.shape[1]

    @property
    def A1(self) -> np.ndarray:
        return self.rows[0]

    @property
    def A2(self) -> np.ndarray:
        return self.rows[1]

    @property
    def A3(self) -> np.ndarray:
        return self.rows[2]

    @property
    def chart(self) -> ChartMetric:
        return get_chart(self.target)

    @property
    def gram(self) -> np.ndarray:
        return self.rows @ self.rows.T

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.m,):
            raise ValueError(f"point has shape {x.shape}, map needs (..., {self.m})")
        return x @ self.rows.T

    def witnesses(self) -> dict[str, float]:
        Q = self.gram
        return {
            "A1.A1": float(Q[0, 0]), "A2.A2": float(Q[1, 1]), "A3.A3": float(Q[2, 2]),
            "A1.A2": float(Q[0, 1]), "A1.A3": float(Q[0, 2]), "A2.A3": float(Q[1, 2]),
        }

    def to_dict(self) -> dict:
        return {"target": self.target, "m": self.m,
                "A1": self.A1.tolist(), "A2": self.A2.tolist(), "A3": self.A3.tolist()}


# ---------------------------------------------------------------------------
# tension


def _image(phi: LinearMap, x) -> np.ndarray:
    return check_domain(phi.chart, phi(x))


def tension_linear(phi: LinearMap, x, method: str = "closed") -> np.ndarray:
    """Tension field at ``x`` in coordinate components.

    ``method="closed"`` uses the target-specific formula, ``"contraction"``
    contracts the chart Christoffels with the Gram matrix.
    """
    y = _image(phi, x)
    Q = phi.gram
    if method == "contraction":
        return np.einsum("...sab,ab->...s", christoffel_at(phi.chart, y), Q)
    if method != "closed":
        raise ValueError(f"unknown method {method!r}")
    if phi.target == "sol":
        z = y[..., 2]
        return np.stack(np.broadcast_arrays(
            2 * Q[0, 2] + 0 * z, -2 * Q[1, 2] + 0 * z,
            Q[1, 1] * np.exp(-2 * z) - Q[0, 0] * np.exp(2 * z)), axis=-1)
    y1 = y[..., 0]
    return np.stack([
        -Q[1, 1] * y1 + Q[1, 2],
        Q[0, 1] * y1 - Q[0, 2],
        Q[0, 1] * y1**2 - Q[0, 2] * y1 - Q[0, 1],
    ], axis=-1)


# ---------------------------------------------------------------------------
# bitension


def _assemble(Q, A, tau, grad_tau, lap_tau, gam, dgam_x, riem):
    """Combine the five bitension terms.

    ``grad_tau[..., a, i]`` = d_i tau^a, ``dgam_x[..., i, s, a, b]`` = d_i (Gamma o phi).
    """
    t2 = np.einsum("...ai,bi,...sab->...s", grad_tau, A, gam)
    t3 = t2 + np.einsum("...a,bi,...isab->...s", tau, A, dgam_x)
    t4 = np.einsum("br,...a,...nab,...snr->...s", Q, tau, gam, gam)
    t5 = np.einsum("...n,ab,...sban->...s", tau, Q, riem)
    return lap_tau + t2 + t3 + t4 - t5


def bitension_numeric(phi: LinearMap, x, h: float = 1e-4, method: str = "auto") -> np.ndarray:
    """Bitension field at ``x`` from the generic coordinate formula.

    ``method="auto"`` differentiates tau through the chain rule using the
    chart's closed-form partials (second Christoffel partials when the chart
    has third metric partials); ``"fd"`` takes central differences of the
    contraction tension with step ``h``.
    """
    if not h > 0:
        raise ValueError("step must be positive")
    if h > H_MAX:
        raise StepTooLarge(f"step {h:g} exceeds {H_MAX:g}")
    chart = phi.chart
    A = phi.rows
    Q = phi.gram
    x = np.asarray(x, dtype=float)
    y = _image(phi, x)
    if method == "auto" and chart.d3g is None:
        method = "fd"
    if method == "auto":
        gam, dgam, ddgam = _christoffel_jet(chart, y, 2)
        tau = np.einsum("...sab,ab->...s", gam, Q)
        grad_tau = np.einsum("...msab,ab,mi->...si", dgam, Q, A)
        lap_tau = np.einsum("...nmsab,ab,mn->...s", ddgam, Q, Q)
    elif method == "fd":
        gam, dgam = _christoffel_jet(chart, y, 1)
        tau = tension_linear(phi, x, "contraction")
        m = phi.m
        grad_tau = np.zeros(x.shape[:-1] + (3, m))
        lap_tau = np.zeros(x.shape[:-1] + (3,))
        for i in range(m):
            step = np.zeros(m)
            step[i] = h
            plus = tension_linear(phi, x + step, "contraction")
            minus = tension_linear(phi, x - step, "contraction")
            grad_tau[..., :, i] = (plus - minus) / (2 * h)
            lap_tau += (plus - 2 * tau + minus) / h**2
    else:
        raise ValueError(f"unknown method {method!r}")
    dgam_x = np.einsum("...msab,mi->...isab", dgam, A)
    riem = riemann_mixed_at(chart, y)
    return _assemble(Q, A, tau, grad_tau, lap_tau, gam, dgam_x, riem)


# ---------------------------------------------------------------------------
# closed-form residuals


def _require(phi: LinearMap, target: str) -> None:
    if phi.target != target:
        raise WrongChart(f"closed form is for target {target}, map targets {phi.target}")


def sol_residual_closed(phi: LinearMap, x) -> np.ndarray:
    """Closed-form bitension of a linear map into Sol, shape (..., 3)."""
    _require(phi, "sol")
    z = _image(phi, x)[..., 2]
    Q = phi.gram
    a11, a22, a33, a13, a23 = Q[0, 0], Q[1, 1], Q[2, 2], Q[0, 2], Q[1, 2]
    ep, em = np.exp(2 * z), np.exp(-2 * z)
    r1 = -8 * a13 * a11 * ep
    r2 = 8 * a23 * a22 * em
    r3 = (4 * (a22 * a33 + a23**2) * em - 4 * (a11 * a33 + a13**2) * ep
          + 2 * a11**2 * ep**2 - 2 * a22**2 * em**2)
    return np.stack(np.broadcast_arrays(r1, r2, r3), axis=-1)


def _nil_terms(Q) -> list[list[list[float]]]:
    """Monomials of the Nil residual coefficients, as polynomials in y1 (lowest degree first)."""
    a11, a22, a12, a13, a23 = Q[0, 0], Q[1, 1], Q[0, 1], Q[0, 2], Q[1, 2]
    lin = [-a12 * a11, -3 * a12 * a22]
    const = [a13 * a11, a13 * a22, 2 * a12 * a23]
    return [
        [[a12 * a13, -a23 * a22], [a22**2, -a12**2]],
        [const, lin],
        [[a12 * a11, a12 * a22], const, lin],
    ]


def _nil_coefficients(Q) -> list[list[float]]:
    return [[sum(t) for t in row] for row in _nil_terms(Q)]


def nil_residual_closed(phi: LinearMap, x) -> np.ndarray:
    """Closed-form bitension of a linear map into Nil, shape (..., 3)."""
    _require(phi, "nil")
    y1 = _image(phi, x)[..., 0]
    out = [sum(c * y1**d for d, c in enumerate(coefs)) for coefs in _nil_coefficients(phi.gram)]
    return np.stack(np.broadcast_arrays(*out), axis=-1)


def residual_closed(phi: LinearMap, x) -> np.ndarray:
    return sol_residual_closed(phi, x) if phi.target == "sol" else nil_residual_closed(phi, x)


def default_probes(m: int, seed: int = 0) -> np.ndarray:
    """Origin, +-e_i, and one seeded point in [-1, 1]^m."""
    eye = np.eye(m)
    rng = np.random.default_rng([seed, m])
    return np.vstack([np.zeros(m), eye, -eye, rng.uniform(-1, 1, m)])


def random_probes(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points uniform in the closed unit ball of R^m."""
    v = rng.standard_normal((n, m))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * rng.uniform(0, 1, (n, 1)) ** (1.0 / m)


def residual_report(phi: LinearMap, probes=None, tol: float = TOL_MAP, seed: int = 0,
                    method: str = "closed", h: float = 1e-4) -> ResidualReport:
    """Residual triple at each probe with a sup-norm verdict."""
    probes = default_probes(phi.m, seed) if probes is None else np.atleast_2d(np.asarray(probes, float))
    if method == "closed":
        vals = residual_closed(phi, probes)
    elif method in ("auto", "fd"):
        vals = bitension_numeric(phi, probes, h=h, method=method)
    else:
        raise ValueError(f"unknown method {method!r}")
    return ResidualReport.build(vals, probes, tol, method=f"{phi.target}-{method}")


# ---------------------------------------------------------------------------
# classification


def _effective_gram(phi: LinearMap, eps: float):
    """Gram matrix with rows of squared norm <= eps treated as exact zeros.

    Also returns the Cauchy-Schwarz scale matrix S[a, b] = |A^a| |A^b|, the
    natural size of each witness.
    """
    Q = phi.gram.copy()
    zero = np.diag(Q) <= eps
    Q[zero, :] = 0.0
    Q[:, zero] = 0.0
    n = np.sqrt(np.diag(Q))
    return Q, np.outer(n, n), zero


def _vanishes(pairs, eps: float) -> bool:
    """Every (value, scale) pair satisfies |value| <= eps * scale."""
    return all(abs(v) <= eps * s for v, s in pairs)


@dataclass(frozen=True)
class ClassificationVerdict:
    target: str
    case: str
    witnesses: dict = field(hash=False)
    harmonic: bool
    biharmonic: bool

    def to_dict(self) -> dict:
        return {"target": self.target, "case": self.case, "harmonic": self.harmonic,
                "biharmonic": self.biharmonic, "witnesses": dict(self.witnesses)}

    def describe(self) -> str:
        status = "harmonic" if self.harmonic else ("biharmonic" if self.biharmonic else "not biharmonic")
        return f"case {self.case}, {status}"


def case_predicates(phi: LinearMap, eps: float = EPS_CLASS) -> dict[str, bool]:
    """The classification case conditions evaluated literally (the Nil ones overlap)."""
    Q, S, zero = _effective_gram(phi, eps)
    z1, z2, z3 = (bool(v) for v in zero)
    if phi.target == "sol":
        return {
            "S-i": z3 and _vanishes([(Q[0, 0] - Q[1, 1], S[0, 0] + S[1, 1])], eps),
            "S-ii": (not z3) and z1 and z2,
        }
    return {
        "N-i": z1 and _vanishes([(Q[1, 2], S[1, 2])], eps),
        "N-ii": z1 and z2,
        "N-iii": z2 and _vanishes([(Q[0, 2], S[0, 2])], eps),
    }


def _case(phi: LinearMap, eps: float) -> str:
    hits = case_predicates(phi, eps)
    if phi.target == "nil" and hits["N-ii"]:
        # A1 = A2 = 0 satisfies all three conditions; report the most specific
        return "N-ii"
    named = [name for name, hit in hits.items() if hit]
    return named[0] if named else NO_CASE


def _harmonic(phi: LinearMap, eps: float) -> bool:
    """Tension vanishes identically, from its coefficients in the free coordinate."""
    Q, S, zero = _effective_gram(phi, eps)
    if phi.target == "sol":
        # tau3 = |A2|^2 e^{-2z} - |A1|^2 e^{2z}; z = A3.x is frozen at 0 when A3 = 0
        pairs = [(2 * Q[0, 2], 2 * S[0, 2]), (2 * Q[1, 2], 2 * S[1, 2])]
        if zero[2]:
            pairs.append((Q[1, 1] - Q[0, 0], S[0, 0] + S[1, 1]))
        else:
            pairs += [(Q[1, 1], 0.0), (Q[0, 0], 0.0)]
        return _vanishes(pairs, eps)
    # Nil: tau is polynomial in y1 = A1.x, frozen at 0 when A1 = 0
    pairs = [(Q[1, 2], S[1, 2]), (Q[0, 2], S[0, 2]), (Q[0, 1], S[0, 1])]
    if not zero[0]:
        pairs.append((Q[1, 1], 0.0))
    return _vanishes(pairs, eps)


def _sol_terms(Q) -> list[list[list[float]]]:
    """Monomials of the Sol residual coefficients on e^{2z}, e^{-2z}, e^{4z}, e^{-4z}."""
    a11, a22, a33, a13, a23 = Q[0, 0], Q[1, 1], Q[2, 2], Q[0, 2], Q[1, 2]
    return [
        [[-8 * a13 * a11], [], [], []],
        [[], [8 * a23 * a22], [], []],
        [[-4 * a11 * a33, -4 * a13**2], [4 * a22 * a33, 4 * a23**2], [2 * a11**2], [-2 * a22**2]],
    ]


def _pairs(terms_q, terms_s):
    """(coefficient, scale) per coefficient; the scale sums |monomial| over the norm matrix."""
    return [[(sum(tq), sum(abs(v) for v in ts)) for tq, ts in zip(rq, rs)]
            for rq, rs in zip(terms_q, terms_s)]


def _biharmonic(phi: LinearMap, eps: float) -> bool:
    """Closed-form residual vanishes identically, from its coefficients."""
    Q, S, zero = _effective_gram(phi, eps)
    if phi.target == "sol":
        rows = _pairs(_sol_terms(Q), _sol_terms(S))
        if zero[2]:
            # exponentials collapse to 1 when A3 = 0: only the sums matter
            rows = [[(sum(c for c, _ in row), sum(sc for _, sc in row))] for row in rows]
    else:
        rows = _pairs(_nil_terms(Q), _nil_terms(S))
        if zero[0]:
            # y1 = A1.x is identically 0: only constant terms survive
            rows = [row[:1] for row in rows]
    # otherwise the basis functions are independent, so every coefficient must vanish
    return _vanishes([pair for row in rows for pair in row], eps)


def classify(phi: LinearMap, eps: float = EPS_CLASS) -> ClassificationVerdict:
    """Classification case, harmonic flag and biharmonic flag, each computed separately.

    A row with |A^a|^2 <= eps is a zero vector. Any other witness-derived
    quantity counts as zero when it is at most eps times its natural size,
    the same expression evaluated on the norms |A^a| |A^b|.
    """
    return ClassificationVerdict(target=phi.target, case=_case(phi, eps), witnesses=phi.witnesses(),
                                 harmonic=_harmonic(phi, eps), biharmonic=_biharmonic(phi, eps))


# ---------------------------------------------------------------------------
# corpus and I/O

M_CHOICES = (1, 2, 3, 5)


def _vec(rng, m, lo=0.5, hi=2.0):
    v = rng.standard_normal(m)
    return v / np.linalg.norm(v) * rng.uniform(lo, hi)


def _perp(rng, u, m):
    """A random vector orthogonal to ``u`` (zero when m = 1)."""
    if m == 1:
        return np.zeros(1)
    v = _vec(rng, m)
    v -= (v @ u) / (u @ u) * u
    return v


def _same_norm(rng, u, m):
    """A random vector with the same Euclidean norm as ``u``."""
    if m == 1:
        return u * rng.choice([-1.0, 1.0])
    q, _ = np.linalg.qr(rng.standard_normal((m, m)))
    return q @ u


def _nudge(rng, lo=1e-3, hi=1e-1):
    return rng.uniform(lo, hi) * rng.choice([-1.0, 1.0])


def corpus_map(target: str, index: int, seed: int = 0) -> LinearMap:
    """Map number ``index`` of the validation corpus; depends only on (target, seed, index).

    Families mix generic maps (entries uniform in [-2, 2]) with exact classification
    cases and their perturbations, so both verdicts are well represented.
    """
    rng = np.random.default_rng([seed, TARGETS.index(target), index])
    m = int(rng.choice(M_CHOICES))
    family = index % 8
    z = np.zeros(m)
    if family == 0:
        A = rng.uniform(-2, 2, (3, m))
        return LinearMap(A, target)
    if target == "sol":
        if family == 1:  # S-i
            a1 = _vec(rng, m)
            rows = (a1, _same_norm(rng, a1, m), z)
        elif family == 2:  # S-ii
            rows = (z, z, _vec(rng, m))
        elif family == 3:  # S-i with unequal norms
            a1 = _vec(rng, m)
            rows = (a1, _same_norm(rng, a1, m) * (1 + _nudge(rng)), z)
        elif family == 4:  # S-ii with a small first row
            rows = (_vec(rng, m, 1e-3, 1e-2), z, _vec(rng, m))
        elif family == 5:  # A3 = 0, generic norms
            rows = (_vec(rng, m), _vec(rng, m), z)
        elif family == 6:  # A1, A2 orthogonal to A3
            a3 = _vec(rng, m)
            rows = (_perp(rng, a3, m), _perp(rng, a3, m), a3)
        else:  # one horizontal row only
            rows = (z, _vec(rng, m), _vec(rng, m))
    else:
        if family == 1:  # N-i
            a2 = _vec(rng, m)
            rows = (z, a2, _perp(rng, a2, m))
        elif family == 2:  # N-ii
            rows = (z, z, _vec(rng, m))
        elif family == 3:  # N-iii
            a1 = _vec(rng, m)
            rows = (a1, z, _perp(rng, a1, m))
        elif family == 4:  # N-i broken by a small A2.A3
            a2 = _vec(rng, m)
            rows = (z, a2, _perp(rng, a2, m) + _nudge(rng) * a2)
        elif family == 5:  # N-iii with a small A2
            a1 = _vec(rng, m)
            rows = (a1, _vec(rng, m, 1e-3, 1e-2), _perp(rng, a1, m))
        elif family == 6:  # A1 orthogonal to A2, both nonzero
            a1 = _vec(rng, m)
            a2 = _perp(rng, a1, m) if m > 1 else _vec(rng, m)
            rows = (a1, a2, _vec(rng, m))
        else:  # A2 = 0 with A1.A3 != 0
            a1 = _vec(rng, m)
            rows = (a1, z, _perp(rng, a1, m) + _nudge(rng, 0.1, 1.0) * a1)
    return LinearMap(np.stack(rows), target)


def map_corpus(target: str, n: int = 1000, seed: int = 0) -> list[LinearMap]:
    return [corpus_map(target, i, seed) for i in range(n)]


def parse_map(text: str) -> LinearMap:
    """Read a map from TOML text with keys target, m (optional), A1, A2, A3."""
    import tomli

    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"malformed map file: {exc}") from exc
    missing = [k for k in ("target", "A1", "A2", "A3") if k not in data]
    if missing:
        raise ParseError(f"map file is missing keys: {', '.join(missing)}")
    try:
        rows = [np.atleast_1d(np.asarray(data[k], dtype=float)) for k in ("A1", "A2", "A3")]
    except (TypeError, ValueError) as exc:
        raise ParseError(f"map rows must be numeric lists: {exc}") from exc
    if any(r.ndim != 1 for r in rows) or len({r.size for r in rows}) != 1:
        raise ParseError("A1, A2, A3 must be flat lists of equal length")
    if "m" in data and data["m"] != rows[0].size:
        raise ParseError(f"m = {data['m']} does not match row length {rows[0].size}")
    try:
        return LinearMap(np.stack(rows), str(data["target"]))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def load_map(path) -> LinearMap:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise ParseError(f"map file is not text: {exc}") from exc
    return parse_map(text)


__all__: Sequence[str] = [
    "LinearMap", "ClassificationVerdict", "tension_linear", "bitension_numeric",
    "sol_residual_closed", "nil_residual_closed", "residual_closed", "residual_report",
    "default_probes", "random_probes", "classify", "case_predicates", "corpus_map",
    "map_corpus", "parse_map", "load_map", "EPS_CLASS", "TOL_MAP",
]
