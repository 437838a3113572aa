from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

BIHARMONIC = "biharmonic"
NOT_BIHARMONIC = "not_biharmonic"


@dataclass
class ResidualReport:
    """Per-probe residual components with a sup-norm verdict.

    ``sup_norm`` is the max absolute entry of ``per_component``; ``probes``
    holds arc-length values (curves) or domain points (maps).
    """

    per_component: np.ndarray
    sup_norm: float
    verdict: str
    probes: np.ndarray
    tol: float
    method: str = ""
    flags: tuple[str, ...] = ()
    norms: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def build(cls, per_component, probes, tol, method="", flags=(), norms=None, force=None):
        per_component = np.atleast_2d(np.asarray(per_component, dtype=float))
        sup = float(np.max(np.abs(per_component))) if per_component.size else 0.0
        if force is not None:
            verdict = force
        else:
            verdict = BIHARMONIC if sup < tol else NOT_BIHARMONIC
        return cls(per_component=per_component, sup_norm=sup, verdict=verdict,
                   probes=np.asarray(probes), tol=float(tol), method=method,
                   flags=tuple(flags), norms=norms)

    @property
    def biharmonic(self) -> bool:
        return self.verdict == BIHARMONIC

    @property
    def component_sups(self) -> np.ndarray:
        if not self.per_component.size:
            return np.zeros(self.per_component.shape[-1])
        return np.max(np.abs(self.per_component), axis=0)

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "verdict": self.verdict,
            "sup_norm": self.sup_norm,
            "tol": self.tol,
            "component_sups": [float(v) for v in self.component_sups],
            "flags": list(self.flags),
            "n_probes": int(len(self.probes)),
        }
