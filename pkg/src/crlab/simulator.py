"""Interactive sessions over an RD channel and the (n, K, lambda) statistics.

Labels are ints in ``1..K``; the error label ``e`` is represented by ``None``.
"""
from __future__ import annotations

import csv
import math
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional, Sequence

import numpy as np

from .channel import RdChannel

Label = Optional[int]
ERROR_LABEL = "e"
AUDIT_SLACK = 1e-9


class ProtocolViolation(RuntimeError):
    """A strategy emitted a symbol outside its terminal's input alphabet."""

    def __init__(self, terminal: int, step: int, symbol):
        super().__init__(f"terminal {terminal} emitted {symbol!r} at step {step}")
        self.terminal = terminal
        self.step = step
        self.symbol = symbol


class Strategy(ABC):
    """Deterministic causal behavior of one terminal.

    ``emit`` is called once per step with the terminal's own received
    history so far (length k-1 at step k) and returns the next input symbol.
    Implementations may keep incremental state, but it must be a function of
    that history alone; ``reset`` clears it before every session.
    """

    def reset(self) -> None:
        pass

    @abstractmethod
    def emit(self, history: Sequence[int]) -> int: ...

    @abstractmethod
    def finalize(self, history: Sequence[int]) -> Label: ...


class FunctionStrategy(Strategy):
    """Stateless strategy assembled from two callables."""

    def __init__(self, emit: Callable[[Sequence[int]], int],
                 finalize: Callable[[Sequence[int]], Label] = lambda h: 1):
        self._emit = emit
        self._finalize = finalize

    def emit(self, history):
        return self._emit(history)

    def finalize(self, history):
        return self._finalize(history)


def constant_strategy(symbol: int, label: Label = 1) -> FunctionStrategy:
    return FunctionStrategy(lambda h: symbol, lambda h: label)


@dataclass(frozen=True)
class SessionTrace:
    n: int
    x1: tuple[int, ...]
    x2: tuple[int, ...]
    y1: tuple[int, ...]
    y2: tuple[int, ...]


@dataclass(frozen=True)
class CrOutcome:
    phi: Label
    psi: Label

    @property
    def agreed(self) -> bool:
        return self.phi is not None and self.phi == self.psi


def session_rng(seed: int, index: int | None = None) -> np.random.Generator:
    """Random stream of one session.

    A standalone session uses ``SeedSequence(seed)``; session ``index`` of a
    batch uses ``SeedSequence(seed, spawn_key=(index,))``, so any subset of a
    batch can be recomputed, in any order or process, bit for bit.
    """
    key = () if index is None else (int(index),)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))


def run_session(ch: RdChannel, s1: Strategy, s2: Strategy, n: int,
                seed: int | np.random.Generator = 0) -> tuple[SessionTrace, CrOutcome]:
    if n < 1:
        raise ValueError("a session needs at least one step")
    rng = seed if isinstance(seed, np.random.Generator) else session_rng(seed)
    # same draws, in the same order, as n calls of channel.step
    uniforms = rng.random((n, 2)).tolist()
    nx1, nx2 = ch.nx1, ch.nx2
    sample = ch.sample
    x1h: list[int] = []
    x2h: list[int] = []
    y1h: list[int] = []
    y2h: list[int] = []
    s1.reset()
    s2.reset()
    for k in range(n):
        a = s1.emit(y1h)
        b = s2.emit(y2h)
        if not (type(a) is int and 0 <= a < nx1):
            raise ProtocolViolation(1, k + 1, a)
        if not (type(b) is int and 0 <= b < nx2):
            raise ProtocolViolation(2, k + 1, b)
        u1, u2 = uniforms[k]
        y1, y2 = sample(a, b, u1, u2)
        x1h.append(a)
        x2h.append(b)
        y1h.append(y1)
        y2h.append(y2)
    outcome = CrOutcome(s1.finalize(y1h), s2.finalize(y2h))
    return SessionTrace(n, tuple(x1h), tuple(x2h), tuple(y1h), tuple(y2h)), outcome


def iter_sessions(ch: RdChannel, s1: Strategy, s2: Strategy, n: int,
                  sessions: int, seed: int = 0) -> Iterator[tuple[SessionTrace, CrOutcome]]:
    for i in range(sessions):
        yield run_session(ch, s1, s2, n, session_rng(seed, i))


def run_sessions(ch: RdChannel, s1: Strategy, s2: Strategy, n: int,
                 sessions: int, seed: int = 0) -> list[CrOutcome]:
    return [out for _, out in iter_sessions(ch, s1, s2, n, sessions, seed)]


def replay_inputs(strategy: Strategy, received: Sequence[int]) -> list[int]:
    """Inputs a strategy emits when fed ``received`` one symbol at a time."""
    strategy.reset()
    hist: list[int] = []
    out = []
    for y in received:
        out.append(strategy.emit(hist))
        hist.append(y)
    return out


def bits_to_label(bits: Sequence[int]) -> int:
    """Label in 1..2^len(bits) for a bit string, most significant bit first."""
    v = 0
    for b in bits:
        v = (v << 1) | b
    return v + 1


@dataclass
class CrStats:
    K: int
    n: int
    sessions: int
    agree_prob: float
    lambda_hat: float
    rate: float
    label_histogram: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "K": str(self.K) if self.K > 2 ** 53 else self.K,
            "log2_K": math.log2(self.K),
            "n": self.n,
            "sessions": self.sessions,
            "agree_prob": self.agree_prob,
            "lambda_hat": self.lambda_hat,
            "rate": self.rate,
            "distinct_labels": len(self.label_histogram),
            "label_histogram": {str(k): v for k, v in sorted(self.label_histogram.items())},
        }


def _scaled(K: int, count: int, total: int) -> float:
    if count == 0:
        return 0.0
    try:
        return K * count / total
    except OverflowError:
        return math.inf


def _check_label(label: Label, K: int) -> None:
    if label is not None and not (isinstance(label, int) and 1 <= label <= K):
        raise ValueError(f"label {label!r} outside 1..{K}")


def evaluate(outcomes: Sequence[CrOutcome], K: int, n: int) -> CrStats:
    """Empirical agreement, uniformity deviation and rate of a batch of sessions.

    ``lambda_hat`` is the smallest lambda for which the empirical law of
    agreed labels meets ``(1-lambda)/K <= Pr{phi=psi=l} <= (1+lambda)/K`` for
    every l and Pr{phi != psi or phi = e} <= lambda.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if not outcomes:
        raise ValueError("no outcomes to evaluate")
    hist: Counter = Counter()
    for o in outcomes:
        _check_label(o.phi, K)
        _check_label(o.psi, K)
        if o.agreed:
            hist[o.phi] += 1
    total = len(outcomes)
    agreed = sum(hist.values())
    hi = max(hist.values(), default=0)
    lo = min(hist.values()) if len(hist) == K else 0
    lam = max(_scaled(K, hi, total) - 1.0, 1.0 - _scaled(K, lo, total), 1.0 - agreed / total)
    return CrStats(K=K, n=n, sessions=total, agree_prob=agreed / total,
                   lambda_hat=lam, rate=math.log2(K) / n, label_histogram=dict(hist))


@dataclass
class AuditCheck:
    name: str
    lhs: float
    relation: str
    rhs: float
    passed: bool


@dataclass
class AuditReport:
    K: int
    lam: float
    sessions: int
    H_phi: float
    H_psi: float
    H_joint: float
    H_phi_given_psi: float
    H_psi_given_phi: float
    checks: list[AuditCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("lam", "sessions", "H_phi", "H_psi", "H_joint",
                                             "H_phi_given_psi", "H_psi_given_phi")}
        d["log2_K"] = math.log2(self.K)
        d["checks"] = [vars(c) for c in self.checks]
        d["passed"] = self.passed
        return d


def _hist_entropy(counts: Iterable[int], total: int) -> float:
    c = np.fromiter(counts, dtype=float)
    p = c[c > 0] / total
    return float(max(-np.sum(p * np.log2(p)), 0.0))


def converse_audit(outcomes: Sequence[CrOutcome], K: int, lam: float) -> AuditReport:
    """Check the Fano and uniformity entropy inequalities on the label histogram."""
    if not outcomes:
        raise ValueError("no outcomes to audit")
    total = len(outcomes)
    pairs = Counter((o.phi, o.psi) for o in outcomes)
    phis = Counter(o.phi for o in outcomes)
    psis = Counter(o.psi for o in outcomes)
    h_joint = _hist_entropy(pairs.values(), total)
    h_phi = _hist_entropy(phis.values(), total)
    h_psi = _hist_entropy(psis.values(), total)
    h_phi_psi = max(h_joint - h_psi, 0.0)
    h_psi_phi = max(h_joint - h_phi, 0.0)
    logk = math.log2(K)

    def check(name, lhs, rel, rhs):
        ok = lhs <= rhs + AUDIT_SLACK if rel == "<=" else lhs >= rhs - AUDIT_SLACK
        return AuditCheck(name, lhs, rel, rhs, bool(ok))

    checks = [
        check("fano", max(h_phi_psi, h_psi_phi), "<=", 1.0 + lam * logk),
        check("joint_entropy", h_joint, ">=", (1.0 - lam) * logk - 1.0),
        check("marginal_entropy", min(h_phi, h_psi), ">=", (1.0 - 2.0 * lam) * logk - 2.0),
        check("joint_entropy_loose", h_joint, ">=", (1.0 - 3.0 * lam) * logk - 3.0),
    ]
    return AuditReport(K, lam, total, h_phi, h_psi, h_joint, h_phi_psi, h_psi_phi, checks)


class OutcomeDumpError(ValueError):
    pass


def _fmt_label(label: Label) -> str:
    return ERROR_LABEL if label is None else str(label)


def _parse_label(text: str, where: str) -> Label:
    text = text.strip()
    if text == ERROR_LABEL:
        return None
    try:
        v = int(text)
    except ValueError:
        raise OutcomeDumpError(f"{where}: label {text!r} is neither an integer nor 'e'") from None
    if v < 1:
        raise OutcomeDumpError(f"{where}: label {v} < 1")
    return v


def write_outcomes(path, outcomes: Sequence[CrOutcome]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["session_id", "phi", "psi"])
        for i, o in enumerate(outcomes):
            w.writerow([i, _fmt_label(o.phi), _fmt_label(o.psi)])


def read_outcomes(path) -> list[CrOutcome]:
    path = Path(path)
    if not path.is_file():
        raise OutcomeDumpError(f"outcome dump not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["session_id", "phi", "psi"]:
        raise OutcomeDumpError(f"{path}: expected header session_id,phi,psi")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 3:
            raise OutcomeDumpError(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
        where = f"{path}:{lineno}"
        out.append(CrOutcome(_parse_label(row[1], where), _parse_label(row[2], where)))
    if not out:
        raise OutcomeDumpError(f"{path}: no outcomes")
    return out
