"""The constructive common-randomness schemes on the binary BSC family.

Each scheme is a pair of deterministic strategies plus its closed-form rate.
Terminal 1 is Alice (inputs x1, receives y1), terminal 2 is Bob.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .channel import BscTwoWayParams, RdChannel, bsc_params_of, from_bsc_params
from .infomeasures import cond_entropy, markov2_entropy_rate
from .simulator import SessionTrace, Strategy

PROTOCOL_IDS = ("case_i_naive", "case_i_adaptive", "case_ii",
                "case_iii_v1", "case_iii_v2", "case_iv")

# bit budget of the adaptive case-i labels, as a fraction of n
ADAPTIVE_BUDGET = Fraction(58, 100)

_REQUIRED = {
    "case_i_naive": {"p1": 0.0, "p2": 0.0, "q1": 0.0, "q2": 0.5},
    "case_i_adaptive": {"p1": 0.0, "p2": 0.0, "q1": 0.0, "q2": 0.5},
    "case_ii": {"p1": 0.5, "p2": 0.5, "q1": 0.0, "q2": 0.5},
    "case_iii_v1": {"p1": 0.0, "p2": 0.5, "q1": 0.0, "q2": 0.5},
    "case_iii_v2": {"p1": 0.0, "p2": 0.5, "q1": 0.0, "q2": 0.5},
    "case_iv": {"p1": 0.0, "p2": 0.0},
}


class ProtocolMismatch(ValueError):
    """Protocol id, block length and channel are not compatible."""


class StageParseError(ValueError):
    """A trace does not have the adaptive case-i stage structure."""


def _check_id(pid: str) -> None:
    if pid not in PROTOCOL_IDS:
        raise ProtocolMismatch(f"unknown protocol {pid!r}; choose from {', '.join(PROTOCOL_IDS)}")


def required_params(pid: str) -> dict[str, float]:
    _check_id(pid)
    return dict(_REQUIRED[pid])


def canonical_params(pid: str, q1: float | None = None, q2: float | None = None) -> BscTwoWayParams:
    """Channel parameters a protocol was designed for (case iv needs q1, q2)."""
    req = required_params(pid)
    if pid == "case_iv":
        if q1 is None or q2 is None:
            raise ProtocolMismatch("case_iv needs q1 and q2")
        req.update(q1=q1, q2=q2)
    return BscTwoWayParams(**req)


def channel_params_for(pid: str, ch: RdChannel) -> BscTwoWayParams:
    """BSC parameters of ``ch``, checked against what protocol ``pid`` requires."""
    req = required_params(pid)
    params = bsc_params_of(ch)
    if params is None:
        raise ProtocolMismatch(f"{pid} needs a binary BSC-family channel")
    got = dict(zip(("p1", "p2", "q1", "q2"), params.as_tuple()))
    bad = [f"{k}={got[k]:g} (needs {v:g})" for k, v in req.items() if abs(got[k] - v) > 1e-12]
    if bad:
        raise ProtocolMismatch(f"channel does not fit {pid}: " + ", ".join(bad))
    return params


@dataclass(frozen=True)
class ProtocolSpec:
    id: str
    n: int
    params: BscTwoWayParams | None = None
    bits: int | None = None  # overrides the default label bit budget

    def __post_init__(self):
        _check_id(self.id)
        if self.n < 1:
            raise ProtocolMismatch("n must be positive")
        if self.id == "case_iii_v1" and self.n % 2:
            raise ProtocolMismatch(f"case_iii_v1 runs 2-step cycles; n={self.n} is odd")
        if self.id == "case_iii_v2" and self.n % 3:
            raise ProtocolMismatch(f"case_iii_v2 runs 3-step cycles; n={self.n} is not a multiple of 3")
        if self.params is None:
            if self.id == "case_iv":
                raise ProtocolMismatch("case_iv needs explicit channel parameters (q1, q2)")
            object.__setattr__(self, "params", canonical_params(self.id))
        else:
            channel_params_for(self.id, from_bsc_params(self.params))
        if self.bits is not None and not 0 <= self.bits <= self.max_bits:
            raise ProtocolMismatch(f"bit budget {self.bits} outside 0..{self.max_bits}")

    @property
    def max_bits(self) -> int:
        n = self.n
        return {
            "case_i_naive": n - 1,
            "case_i_adaptive": n - 1,
            "case_ii": n - 1,
            "case_iii_v1": n // 2,
            "case_iii_v2": 2 * n // 3,
            "case_iv": max(n - 2, 0),
        }[self.id]

    @property
    def B(self) -> int:
        if self.bits is not None:
            return self.bits
        if self.id == "case_i_adaptive":
            return math.floor(ADAPTIVE_BUDGET * self.n)  # exact: 0.58 * 100 is 57.99... in floats
        return self.max_bits

    @property
    def K(self) -> int:
        return 2 ** self.B

    def channel(self) -> RdChannel:
        return from_bsc_params(self.params)


def _label(bits: Sequence[int]) -> int:
    if not bits:
        return 1
    return int("".join("1" if b else "0" for b in bits), 2) + 1


def _padded_label(bits: Sequence[int], width: int) -> int:
    bits = list(bits[:width])
    return _label(bits + [0] * (width - len(bits)))


def _budget_label(bits: Sequence[int], width: int):
    """First ``width`` bits as a label, or the error label if too few."""
    return _label(bits[:width]) if len(bits) >= width else None


class _Constant(Strategy):
    def __init__(self, symbol: int, finalize):
        self.symbol = symbol
        self._finalize = finalize

    def emit(self, history):
        return self.symbol

    def finalize(self, history):
        return self._finalize(history)


# case i: Alice always sends 1, so y2 is x1 = 1 whenever Bob sends 0 and a
# fair coin whenever Bob sends 1; Alice reads x2 noiselessly.

def naive_agreed_bits_alice(y1: Sequence[int]) -> list[int]:
    seq = list(y1[1:])
    return seq[:seq.index(0) + 1] if 0 in seq else seq


def naive_agreed_bits_bob(y2: Sequence[int]) -> list[int]:
    n = len(y2)
    stop = y2.index(0) + 1 if 0 in y2 else n
    return list(y2[:min(stop, n - 1)])


class _NaiveBob(Strategy):
    """Echo each fresh bit until the first 0, relay that 0, then send 0 forever."""

    def __init__(self, width: int):
        self.width = width
        self.reset()

    def reset(self):
        self._seen_zero = False
        self._pos = 0

    def emit(self, history):
        if not history:
            return 1
        for i in range(self._pos, len(history)):
            if history[i] == 0:
                self._seen_zero = True
        self._pos = len(history)
        return 0 if self._seen_zero else 1

    def finalize(self, history):
        return _padded_label(naive_agreed_bits_bob(history), self.width)


def adaptive_bob_inputs(y2: Sequence[int]) -> list[int]:
    """Bob's adaptive case-i inputs: 1 opens a stage, fresh bits are echoed."""
    x = []
    prev = None
    for k in range(len(y2)):
        cur = 1 if k == 0 or prev == 0 else y2[k - 1]
        x.append(cur)
        prev = cur
    return x


def adaptive_agreed_bits_alice(y1: Sequence[int]) -> list[int]:
    # y1 = x2; a 1 at step k means Bob got a fresh bit, relayed at step k+1
    return [y1[k + 1] for k in range(len(y1) - 1) if y1[k] == 1]


def adaptive_agreed_bits_bob(y2: Sequence[int]) -> list[int]:
    x2 = adaptive_bob_inputs(y2)
    return [y2[k] for k in range(len(y2) - 1) if x2[k] == 1]


class _AdaptiveBob(Strategy):
    def __init__(self, width: int):
        self.width = width
        self.reset()

    def reset(self):
        self._last = None

    def emit(self, history):
        x = 1 if not history or self._last == 0 else history[-1]
        self._last = x
        return x

    def finalize(self, history):
        return _budget_label(adaptive_agreed_bits_bob(history), self.width)


class _Relay(Strategy):
    """Case ii Alice: relay the previous received symbol."""

    def __init__(self, width: int):
        self.width = width

    def emit(self, history):
        return history[-1] if history else 0

    def finalize(self, history):
        return _label(history[:self.width])


class _CycleV1Alice(Strategy):
    """Two-step cycles: send 1 to draw a bit, then relay it."""

    def __init__(self, width: int):
        self.width = width

    def emit(self, history):
        return 1 if len(history) % 2 == 0 else history[-1]

    def finalize(self, history):
        return _label(history[0::2][:self.width])


class _CycleV2Alice(Strategy):
    """Three-step cycles: draw, relay own bit, hold 0 for Bob's relay."""

    def __init__(self, width: int):
        self.width = width

    def emit(self, history):
        r = len(history) % 3
        if r == 0:
            return 1
        return history[-1] if r == 1 else 0

    def finalize(self, history):
        bits = []
        for c in range(0, len(history) - 2, 3):
            bits += [history[c], history[c + 2]]
        return _label(bits[:self.width])


class _CycleV2Bob(Strategy):
    def __init__(self, width: int):
        self.width = width

    def emit(self, history):
        r = len(history) % 3
        if r == 0:
            return 1
        return 0 if r == 1 else history[-2]

    def finalize(self, history):
        bits = []
        for c in range(0, len(history) - 2, 3):
            bits += [history[c + 1], history[c]]
        return _label(bits[:self.width])


class _DelayTwoBob(Strategy):
    """Case iv Bob: feed back the output received two steps earlier."""

    def __init__(self, width: int):
        self.width = width

    def emit(self, history):
        return history[-2] if len(history) >= 2 else 0

    def finalize(self, history):
        return _label(history[:self.width])


def build(spec: ProtocolSpec) -> tuple[Strategy, Strategy]:
    """Fresh (Alice, Bob) strategy instances for one protocol run."""
    B = spec.B
    pid = spec.id
    if pid == "case_i_naive":
        return (_Constant(1, lambda h: _padded_label(naive_agreed_bits_alice(h), B)),
                _NaiveBob(B))
    if pid == "case_i_adaptive":
        return (_Constant(1, lambda h: _budget_label(adaptive_agreed_bits_alice(h), B)),
                _AdaptiveBob(B))
    if pid == "case_ii":
        return _Relay(B), _Constant(0, lambda h: _label(h[1:1 + B]))
    if pid == "case_iii_v1":
        return _CycleV1Alice(B), _Constant(0, lambda h: _label(h[1::2][:B]))
    if pid == "case_iii_v2":
        return _CycleV2Alice(B), _CycleV2Bob(B)
    return _Constant(0, lambda h: _label(h[2:2 + B])), _DelayTwoBob(B)


def adaptive_limit() -> float:
    """sum_{j>=1} j/(j+1) 2^-j, summed until the terms drop below 1e-20."""
    terms = []
    j = 1
    while (t := j / (j + 1) * 0.5 ** j) > 1e-20:
        terms.append(t)
        j += 1
    return math.fsum(terms)


def adaptive_partial_sum(J: int) -> float:
    return math.fsum(j / (j + 1) * 0.5 ** j for j in range(1, J + 1))


def naive_rate(n: int) -> float:
    return math.fsum(i * 0.5 ** i for i in range(1, n + 1)) / n


def theoretical_rate(spec: ProtocolSpec) -> float:
    """Bits per step the scheme generates and agrees on, per its closed form."""
    n = spec.n
    if spec.id == "case_i_naive":
        return naive_rate(n)
    if spec.id == "case_i_adaptive":
        return adaptive_limit()
    if spec.id == "case_ii":
        return (n - 1) / n
    if spec.id == "case_iii_v1":
        return 0.5
    if spec.id == "case_iii_v2":
        return 2.0 / 3.0
    p = spec.params
    return markov2_entropy_rate(p.q1, p.q2) * max(n - 2, 0) / n


@dataclass(frozen=True)
class StageRecord:
    stage_index: int
    length: int   # N + 1 steps
    bits: int     # N

    @property
    def z(self) -> float:
        return self.bits / self.length


def _trace_stages(trace: SessionTrace) -> list[tuple[int, int]]:
    x1 = np.asarray(trace.x1)
    x2 = np.asarray(trace.x2)
    y2 = np.asarray(trace.y2)
    if np.any(x1 != 1):
        raise StageParseError("Alice must send 1 at every step")
    if x2.size and x2[0] != 1:
        raise StageParseError("the first stage must open with x2 = 1")
    gen = x2[:-1] == 1
    if np.any(x2[1:][gen] != y2[:-1][gen]):
        raise StageParseError("Bob did not relay a fresh bit on the next step")
    zeros = np.flatnonzero(x2 == 0)
    starts = np.concatenate(([0], zeros[:-1] + 1))
    ones = zeros - starts
    if np.any(ones < 1):
        raise StageParseError("two consecutive relay steps (x2 = 0, 0)")
    return [(int(N) + 1, int(N)) for N in ones]


def stage_statistics(traces) -> tuple[list[StageRecord], float]:
    """Complete stages of adaptive case-i traces and the mean of N/(N+1).

    A trailing stage whose relayed 0 falls outside the block is incomplete
    and dropped.
    """
    records = []
    for tr in traces:
        for length, bits in _trace_stages(tr):
            records.append(StageRecord(len(records), length, bits))
    if not records:
        return records, math.nan
    return records, math.fsum(r.z for r in records) / len(records)


def naive_generated_bits(trace: SessionTrace) -> int:
    """Fresh bits Bob drew in a run terminated by a received 0 within the block."""
    y2 = list(trace.y2)
    return y2.index(0) + 1 if 0 in y2 else 0


class RateMeter:
    """Single-pass estimate of a scheme's rate from a stream of sessions.

    naive case i counts the bits of runs closed within the block, adaptive
    case i averages N/(N+1) over complete stages, case iv pools the lag-2
    plug-in entropy of Bob's agreed sequence, and the fixed-length schemes
    score B/n per agreed session.
    """

    def __init__(self, spec: ProtocolSpec, keep_stages: bool = False):
        self.spec = spec
        self.keep_stages = keep_stages
        self.stage_bits: list[int] = []
        self._sum = 0.0
        self._sumsq = 0.0
        self._count = 0
        self._pairs = np.zeros(4, dtype=np.int64)

    def _push(self, v: float) -> None:
        self._sum += v
        self._sumsq += v * v
        self._count += 1

    def add(self, trace: SessionTrace, outcome=None) -> None:
        spec = self.spec
        n = spec.n
        if spec.id == "case_i_naive":
            self._push(naive_generated_bits(trace) / n)
        elif spec.id == "case_i_adaptive":
            for length, bits in _trace_stages(trace):
                self._push(bits / length)
                if self.keep_stages:
                    self.stage_bits.append(bits)
        elif spec.id == "case_iv":
            s = np.asarray(trace.y2[:max(n - 2, 0)], dtype=np.int64)
            if s.size > 2:
                self._pairs += np.bincount(s[:-2] * 2 + s[2:], minlength=4)
        else:
            if outcome is None:
                raise ValueError(f"{spec.id} rate is measured from outcomes")
            self._push(spec.B / n if outcome.agreed else 0.0)

    @property
    def count(self) -> int:
        """Number of samples behind the estimate (stages for adaptive case i)."""
        return self._count

    def result(self) -> tuple[float, float]:
        """(estimate, standard error); the error is nan where undefined."""
        n = self.spec.n
        if self.spec.id == "case_iv":
            total = self._pairs.sum()
            if total == 0:
                return math.nan, math.nan
            joint = (self._pairs / total).reshape(2, 2)
            return cond_entropy(joint, 1, 0) * (n - 2) / n, math.nan
        c = self._count
        if c == 0:
            return math.nan, math.nan
        mean = self._sum / c
        if c < 2:
            return mean, math.nan
        var = max(self._sumsq - c * mean * mean, 0.0) / (c - 1)
        return mean, math.sqrt(var / c)


def empirical_rate(spec: ProtocolSpec, traces, outcomes=None) -> tuple[float, float]:
    """Sample estimate of the scheme's rate and its standard error (nan if undefined)."""
    meter = RateMeter(spec)
    if outcomes is None:
        for t in traces:
            meter.add(t)
    else:
        for t, o in zip(traces, outcomes):
            meter.add(t, o)
    return meter.result()
