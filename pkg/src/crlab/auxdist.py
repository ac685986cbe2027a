"""Auxiliary distributions p(u,v) p(x1|u) p(x2|v) for the outer bound."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .infomeasures import MASS_TOL, DistributionError


def cardinality_caps(nx1: int, nx2: int) -> tuple[int, int]:
    """Largest |U| and |V| the outer bound needs to search over."""
    return nx1 * (nx1 * nx2 + 1), nx1 * nx2 ** 2


def _check_stochastic(name: str, table: np.ndarray) -> np.ndarray:
    if table.ndim != 2:
        raise DistributionError(f"{name} must be a 2-d table")
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise DistributionError(f"{name} has negative or non-finite entries")
    sums = table.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > MASS_TOL)
    if bad.size:
        raise DistributionError(f"{name} row {bad[0]} sums to {sums[bad[0]]:.12g}")
    return table / sums[:, None]


@dataclass(frozen=True)
class AuxDist:
    puv: np.ndarray     # (nu, nv)
    px1_u: np.ndarray   # (nu, nx1)
    px2_v: np.ndarray   # (nv, nx2)

    def __post_init__(self):
        puv = np.asarray(self.puv, dtype=float)
        if puv.ndim != 2:
            raise DistributionError("puv must be a 2-d table")
        if np.any(puv < 0) or abs(puv.sum() - 1.0) > MASS_TOL:
            raise DistributionError(f"puv is not a distribution (mass {puv.sum():.12g})")
        object.__setattr__(self, "puv", puv / puv.sum())
        a = _check_stochastic("px1_u", np.asarray(self.px1_u, dtype=float))
        b = _check_stochastic("px2_v", np.asarray(self.px2_v, dtype=float))
        if a.shape[0] != puv.shape[0] or b.shape[0] != puv.shape[1]:
            raise DistributionError(
                f"auxiliary sizes disagree: puv {puv.shape}, px1_u {a.shape}, px2_v {b.shape}")
        object.__setattr__(self, "px1_u", a)
        object.__setattr__(self, "px2_v", b)

    @property
    def nu(self) -> int:
        return self.puv.shape[0]

    @property
    def nv(self) -> int:
        return self.puv.shape[1]

    @property
    def nx1(self) -> int:
        return self.px1_u.shape[1]

    @property
    def nx2(self) -> int:
        return self.px2_v.shape[1]

    def input_joint(self) -> np.ndarray:
        """p(x1, x2) induced by the auxiliaries."""
        return np.einsum("uv,ua,vb->ab", self.puv, self.px1_u, self.px2_v)

    @classmethod
    def singleton(cls, px1, px2) -> "AuxDist":
        """Constant U and V: independent inputs with the given marginals."""
        return cls(np.ones((1, 1)), np.atleast_2d(px1), np.atleast_2d(px2))

    @classmethod
    def random(cls, nu: int, nv: int, nx1: int, nx2: int,
               rng: np.random.Generator, alpha: float = 1.0) -> "AuxDist":
        """Draw every simplex from a symmetric Dirichlet(alpha)."""
        puv = rng.dirichlet(np.full(nu * nv, alpha)).reshape(nu, nv)
        a = rng.dirichlet(np.full(nx1, alpha), size=nu)
        b = rng.dirichlet(np.full(nx2, alpha), size=nv)
        return cls(puv, a, b)

    def to_dict(self, digits: int = 12) -> dict:
        def fmt(arr):
            return [[float(f"{x:.{digits}g}") for x in row] for row in arr]
        return {"nu": self.nu, "nv": self.nv, "puv": fmt(self.puv),
                "px1_u": fmt(self.px1_u), "px2_v": fmt(self.px2_v)}

    @classmethod
    def from_dict(cls, d: dict) -> "AuxDist":
        return cls(np.array(d["puv"]), np.array(d["px1_u"]), np.array(d["px2_v"]))
