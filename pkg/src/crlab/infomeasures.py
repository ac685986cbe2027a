"""Exact information measures on finite distributions, in bits.

Distributions are plain numpy arrays. A joint table is an n-dimensional
array whose axes are the random variables; axes are referred to by index.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

MASS_TOL = 1e-9
CMI_SLACK = 1e-9


class DistributionError(ValueError):
    """Raised for arrays that are not probability distributions."""


def as_distribution(p, tol: float = MASS_TOL) -> np.ndarray:
    """Validate ``p`` as a probability table and renormalize it.

    Entries must be nonnegative and sum to one within ``tol``; the returned
    array is rescaled to unit mass exactly.
    """
    arr = np.asarray(p, dtype=float)
    if arr.size == 0:
        raise DistributionError("empty distribution")
    if not np.all(np.isfinite(arr)):
        raise DistributionError("distribution has non-finite entries")
    if np.any(arr < 0):
        raise DistributionError(f"negative entry {arr.min():.3g}")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise DistributionError(f"total mass {total:.12g} differs from 1")
    return arr / total


def _plogp_sum(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def entropy(p) -> float:
    """Shannon entropy -sum p log2 p, with 0 log 0 = 0."""
    return max(_plogp_sum(as_distribution(p)), 0.0)


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DistributionError(f"probability {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def _axes(axes) -> tuple[int, ...]:
    if isinstance(axes, (int, np.integer)):
        return (int(axes),)
    return tuple(int(a) for a in axes)


def marginal(joint, axes: Iterable[int]) -> np.ndarray:
    """Marginal of ``joint`` on ``axes``, keeping them in the given order."""
    joint = np.asarray(joint, dtype=float)
    keep = _axes(axes)
    drop = tuple(a for a in range(joint.ndim) if a not in keep)
    m = joint.sum(axis=drop) if drop else joint
    # sum() leaves the kept axes in ascending order
    order = sorted(keep)
    return np.transpose(m, [order.index(a) for a in keep]) if keep else np.asarray(m)


def _check_disjoint(ndim: int, *groups: Sequence[int]) -> None:
    seen: set[int] = set()
    for g in groups:
        for a in g:
            if not 0 <= a < ndim:
                raise ValueError(f"axis {a} out of range for {ndim}-d table")
            if a in seen:
                raise ValueError(f"axis {a} appears in more than one axis set")
            seen.add(a)


def _joint_entropy(joint: np.ndarray, axes: tuple[int, ...]) -> float:
    if not axes:
        return 0.0
    return _plogp_sum(marginal(joint, axes))


def cond_entropy(joint, target_axes, given_axes=()) -> float:
    """H(target | given) = H(target, given) - H(given)."""
    joint = as_distribution(joint)
    t, g = _axes(target_axes), _axes(given_axes)
    _check_disjoint(joint.ndim, t, g)
    h = _joint_entropy(joint, t + g) - _joint_entropy(joint, g)
    return max(h, 0.0)


def cond_mutual_info(joint, a_axes, b_axes, c_axes=()) -> float:
    """I(A; B | C), clamped at zero against round-off."""
    joint = as_distribution(joint)
    a, b, c = _axes(a_axes), _axes(b_axes), _axes(c_axes)
    _check_disjoint(joint.ndim, a, b, c)
    val = (_joint_entropy(joint, a + c) + _joint_entropy(joint, b + c)
           - _joint_entropy(joint, a + b + c) - _joint_entropy(joint, c))
    if val < -CMI_SLACK:
        raise ArithmeticError(f"conditional mutual information {val:.3g} < 0")
    return max(val, 0.0)


def mutual_info(joint, a_axes, b_axes) -> float:
    return cond_mutual_info(joint, a_axes, b_axes, ())


def markov2_stationary(q1: float, q2: float) -> tuple[float, float]:
    """Stationary law of the chain with rows (1-q1, q1) and (1-q2, q2)."""
    denom = q1 + 1.0 - q2
    pi1 = q1 / denom
    return 1.0 - pi1, pi1


def markov2_entropy_rate(q1: float, q2: float) -> float:
    """Entropy rate of the two-state chain that emits 1 w.p. q1 from 0, q2 from 1."""
    for q in (q1, q2):
        if not 0.0 <= q <= 0.5:
            raise DistributionError(f"transition parameter {q} outside [0, 1/2]")
    if q1 == 0.0:
        return 0.0  # state 0 absorbing
    pi0, pi1 = markov2_stationary(q1, q2)
    return pi0 * binary_entropy(q1) + pi1 * binary_entropy(q2)


def plugin_conditional_entropy(seq: Sequence[int], lag: int = 1) -> float:
    """Plug-in estimate of H(s[t] | s[t-lag]) from one observed sequence."""
    s = np.asarray(seq, dtype=np.int64)
    if s.size <= lag:
        raise ValueError("sequence shorter than the lag")
    prev, nxt = s[:-lag], s[lag:]
    k = int(s.max()) + 1
    counts = np.bincount(prev * k + nxt, minlength=k * k).reshape(k, k)
    return cond_entropy(counts / counts.sum(), 1, 0)
