"""Receiver-decomposable two-way channels.

A channel is a pair of kernels ``w1[x1, x2, y1] = p(y1 | x1, x2)`` and
``w2[x1, x2, y2] = p(y2 | x1, x2)``; the two outputs are drawn
independently given the inputs.
"""
from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .auxdist import AuxDist
from .infomeasures import MASS_TOL


class ChannelError(ValueError):
    """Invalid channel kernels or channel spec."""

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


@dataclass(frozen=True)
class BscTwoWayParams:
    """Crossover probabilities of the binary family.

    Terminal 1 reads x2 through BSC(p1) when x1 = 0 and BSC(p2) when x1 = 1;
    terminal 2 reads x1 through BSC(q1) when x2 = 0 and BSC(q2) when x2 = 1.
    """
    p1: float
    p2: float
    q1: float
    q2: float

    def __post_init__(self):
        for name in ("p1", "p2", "q1", "q2"):
            val = getattr(self, name)
            if not 0.0 <= val <= 0.5:
                raise ChannelError(f"{name}={val} outside [0, 1/2]")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.p1, self.p2, self.q1, self.q2


@dataclass(frozen=True)
class RdChannel:
    w1: np.ndarray
    w2: np.ndarray
    _cdf1: list = field(init=False, repr=False, compare=False)
    _cdf2: list = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        w1 = np.array(self.w1, dtype=float)
        w2 = np.array(self.w2, dtype=float)
        if w1.ndim != 3 or w2.ndim != 3:
            raise ChannelError("kernels must be 3-d arrays indexed [x1][x2][y]")
        if w1.shape[:2] != w2.shape[:2]:
            raise ChannelError(f"input alphabets disagree: {w1.shape[:2]} vs {w2.shape[:2]}")
        w1.setflags(write=False)
        w2.setflags(write=False)
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "_cdf1", np.cumsum(w1, axis=2).tolist())
        object.__setattr__(self, "_cdf2", np.cumsum(w2, axis=2).tolist())

    @property
    def nx1(self) -> int:
        return self.w1.shape[0]

    @property
    def nx2(self) -> int:
        return self.w1.shape[1]

    @property
    def ny1(self) -> int:
        return self.w1.shape[2]

    @property
    def ny2(self) -> int:
        return self.w2.shape[2]

    @classmethod
    def from_kernels(cls, w1, w2, tol: float = MASS_TOL) -> "RdChannel":
        """Build a validated channel; rows within ``tol`` of unit mass are renormalized."""
        ch = cls(w1, w2)
        problems = validate(ch, tol)
        if problems:
            raise ChannelError("invalid channel kernels:\n  " + "\n  ".join(problems), problems)
        return cls(ch.w1 / ch.w1.sum(axis=2, keepdims=True),
                   ch.w2 / ch.w2.sum(axis=2, keepdims=True))

    def sample(self, x1: int, x2: int, u1: float, u2: float) -> tuple[int, int]:
        """Outputs for inputs (x1, x2) by inverse-CDF on two uniforms."""
        row1 = self._cdf1[x1][x2]
        row2 = self._cdf2[x1][x2]
        y1 = min(bisect.bisect_right(row1, u1), len(row1) - 1)
        y2 = min(bisect.bisect_right(row2, u2), len(row2) - 1)
        return y1, y2

    def to_dict(self) -> dict:
        params = bsc_params_of(self)
        if params is not None:
            return {"bsc": dict(zip(("p1", "p2", "q1", "q2"), params.as_tuple()))}
        return {"kernels": {"w1": self.w1.tolist(), "w2": self.w2.tolist()}}


def _bsc_rows(flip: float) -> np.ndarray:
    # rows indexed by the carried symbol
    return np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])


def from_bsc_params(params: BscTwoWayParams) -> RdChannel:
    w1 = np.empty((2, 2, 2))
    w2 = np.empty((2, 2, 2))
    w1[0] = _bsc_rows(params.p1)          # y1 carries x2
    w1[1] = _bsc_rows(params.p2)
    w2[:, 0] = _bsc_rows(params.q1)       # y2 carries x1
    w2[:, 1] = _bsc_rows(params.q2)
    return RdChannel(w1, w2)


def bsc(p1: float, p2: float, q1: float, q2: float) -> RdChannel:
    return from_bsc_params(BscTwoWayParams(p1, p2, q1, q2))


def bsc_params_of(ch: RdChannel, tol: float = 1e-12) -> BscTwoWayParams | None:
    """Recover (p1, p2, q1, q2) if ``ch`` belongs to the binary BSC family."""
    if ch.w1.shape != (2, 2, 2) or ch.w2.shape != (2, 2, 2):
        return None
    p1, p2 = ch.w1[0, 0, 1], ch.w1[1, 0, 1]
    q1, q2 = ch.w2[0, 0, 1], ch.w2[0, 1, 1]
    if max(p1, p2, q1, q2) > 0.5 + tol:
        return None
    try:
        params = BscTwoWayParams(*(float(min(max(v, 0.0), 0.5)) for v in (p1, p2, q1, q2)))
    except ChannelError:
        return None
    ref = from_bsc_params(params)
    if np.max(np.abs(ref.w1 - ch.w1)) > tol or np.max(np.abs(ref.w2 - ch.w2)) > tol:
        return None
    return params


def validate(ch: RdChannel, tol: float = MASS_TOL) -> list[str]:
    """Every conditional row that is not a probability vector; empty when valid."""
    problems = []
    for name, w in (("w1", ch.w1), ("w2", ch.w2)):
        for x1 in range(w.shape[0]):
            for x2 in range(w.shape[1]):
                row = w[x1, x2]
                if not np.all(np.isfinite(row)) or np.any(row < 0):
                    problems.append(f"{name}[x1={x1}][x2={x2}] = {row.tolist()}: negative or non-finite entry")
                elif abs(row.sum() - 1.0) > tol:
                    problems.append(f"{name}[x1={x1}][x2={x2}] = {row.tolist()}: sums to {row.sum():.12g}")
    return problems


def is_decomposing(ch: RdChannel, tol: float = 1e-9) -> bool:
    """True when y1 depends only on x2 and y2 only on x1."""
    d1 = np.max(np.abs(ch.w1 - ch.w1[:1]))   # rows across x1
    d2 = np.max(np.abs(ch.w2 - ch.w2[:, :1]))  # rows across x2
    return bool(d1 <= tol and d2 <= tol)


def step(ch: RdChannel, x1: int, x2: int, rng: np.random.Generator) -> tuple[int, int]:
    """One channel use. Consumes two uniforms from ``rng`` (y1's first)."""
    if not 0 <= x1 < ch.nx1:
        raise ValueError(f"x1={x1} outside input alphabet of size {ch.nx1}")
    if not 0 <= x2 < ch.nx2:
        raise ValueError(f"x2={x2} outside input alphabet of size {ch.nx2}")
    u1, u2 = rng.random(2)
    return ch.sample(x1, x2, u1, u2)


def induced_joint(ch: RdChannel, aux: AuxDist) -> np.ndarray:
    """Joint table over (u, v, x1, x2, y1, y2)."""
    if aux.nx1 != ch.nx1 or aux.nx2 != ch.nx2:
        raise ValueError(
            f"aux input alphabets ({aux.nx1}, {aux.nx2}) do not match channel ({ch.nx1}, {ch.nx2})")
    return np.einsum("uv,ua,vb,abc,abd->uvabcd", aux.puv, aux.px1_u, aux.px2_v, ch.w1, ch.w2)


def parse_channel_spec(spec: dict) -> RdChannel:
    """Channel from its JSON form: ``{"bsc": {...}}`` or ``{"kernels": {"w1": ..., "w2": ...}}``."""
    if not isinstance(spec, dict):
        raise ChannelError("channel spec must be a JSON object")
    if "bsc" in spec:
        b = spec["bsc"]
        try:
            params = BscTwoWayParams(*(float(b[k]) for k in ("p1", "p2", "q1", "q2")))
        except (KeyError, TypeError) as exc:
            raise ChannelError(f"bsc spec needs numeric p1, p2, q1, q2 ({exc})") from exc
        return from_bsc_params(params)
    if "kernels" in spec:
        k = spec["kernels"]
        try:
            w1 = np.array(k["w1"], dtype=float)
            w2 = np.array(k["w2"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ChannelError(f"kernels spec needs nested numeric w1, w2 ({exc})") from exc
        return RdChannel.from_kernels(w1, w2)
    raise ChannelError('channel spec needs a "bsc" or "kernels" key')


def load_channel(source) -> RdChannel:
    """Channel from a dict, an inline JSON string, or a path to a JSON file."""
    if isinstance(source, dict):
        return parse_channel_spec(source)
    text = str(source).strip()
    if not text.startswith("{"):
        path = Path(text)
        if not path.is_file():
            raise ChannelError(f"channel file not found: {path}")
        text = path.read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ChannelError(f"channel spec is not valid JSON: {exc}") from exc
    return parse_channel_spec(spec)
