import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import entropy as scipy_entropy

from crlab.infomeasures import (DistributionError, as_distribution, binary_entropy,
                                cond_entropy, cond_mutual_info, entropy, marginal,
                                markov2_entropy_rate, markov2_stationary, mutual_info,
                                plugin_conditional_entropy)


def _random_joint(rng, shape, alpha=1.0):
    return rng.dirichlet(np.full(int(np.prod(shape)), alpha)).reshape(shape)


def _cmi_loops(joint, a, b, c):
    """Direct sum of p log p(a,b,c)p(c) / (p(a,c)p(b,c)) over atoms."""
    keep = sorted(a + b + c)
    drop = tuple(i for i in range(joint.ndim) if i not in keep)
    p = joint.sum(axis=drop) if drop else joint
    pos = {ax: k for k, ax in enumerate(keep)}
    total = 0.0
    for idx in np.ndindex(p.shape):
        pabc = p[idx]
        if pabc == 0:
            continue

        def mass(axes):
            sel = tuple(idx[pos[ax]] if ax in axes else slice(None) for ax in keep)
            return p[sel].sum()
        total += pabc * math.log2(pabc * mass(c) / (mass(a + c) * mass(b + c)))
    return total


prob_vectors = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=12).filter(
    lambda v: sum(v) > 1e-3).map(lambda v: np.array(v) / sum(v))


def test_entropy_matches_scipy(rng):
    for k in (1, 2, 5, 17):
        p = rng.dirichlet(np.ones(k))
        assert entropy(p) == pytest.approx(scipy_entropy(p, base=2), abs=1e-12)


def test_entropy_uniform_and_point_mass():
    assert entropy(np.full(8, 1 / 8)) == pytest.approx(3.0, abs=1e-12)
    assert entropy([0.0, 1.0, 0.0]) == 0.0


@given(prob_vectors)
def test_entropy_at_most_log_alphabet(p):
    assert entropy(p) <= math.log2(len(p)) + 1e-9


def test_binary_entropy_values():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(scipy_entropy([0.11, 0.89], base=2), abs=1e-14)
    with pytest.raises(DistributionError):
        binary_entropy(1.5)


def test_as_distribution_renormalizes_within_tolerance():
    p = as_distribution([0.5, 0.5 + 5e-10])
    assert p.sum() == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DistributionError):
        as_distribution([0.5, 0.6])
    with pytest.raises(DistributionError):
        as_distribution([1.2, -0.2])
    with pytest.raises(DistributionError):
        as_distribution([])


def test_marginal_axis_order(rng):
    j = _random_joint(rng, (2, 3, 4))
    m = marginal(j, (2, 0))
    assert m.shape == (4, 2)
    np.testing.assert_allclose(m, j.sum(axis=1).T)


def test_chain_rule(rng):
    for _ in range(20):
        j = _random_joint(rng, (2, 3, 2, 2), alpha=0.5)
        hab = cond_entropy(j, (0, 1))
        assert hab == pytest.approx(cond_entropy(j, 1) + cond_entropy(j, 0, 1), abs=1e-9)
        assert cond_entropy(j, 0, (1, 2)) <= entropy(marginal(j, 0)) + 1e-9


def test_cmi_matches_atom_sum(rng):
    for _ in range(30):
        j = _random_joint(rng, (2, 3, 2, 3), alpha=0.3)
        for a, b, c in [((0,), (1,), (2,)), ((0, 3), (1,), ()), ((2,), (0,), (1, 3))]:
            assert cond_mutual_info(j, a, b, c) == pytest.approx(_cmi_loops(j, a, b, c), abs=1e-12)


def test_cmi_symmetric_and_nonnegative(rng):
    for _ in range(30):
        j = _random_joint(rng, (3, 2, 2), alpha=0.2)
        i1 = cond_mutual_info(j, 0, 1, 2)
        assert i1 >= 0
        assert i1 == pytest.approx(cond_mutual_info(j, 1, 0, 2), abs=1e-9)


def test_independent_variables_have_zero_mi(rng):
    p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(4))
    assert mutual_info(np.outer(p, q), 0, 1) == pytest.approx(0.0, abs=1e-12)


def test_overlapping_axes_rejected(rng):
    j = _random_joint(rng, (2, 2))
    with pytest.raises(ValueError):
        cond_mutual_info(j, 0, 0)
    with pytest.raises(ValueError):
        cond_entropy(j, 0, 5)


def test_markov_entropy_rate_against_transition_matrix():
    for q1, q2 in [(0.25, 0.5), (0.1, 0.4), (0.5, 0.5), (0.3, 0.0)]:
        T = np.array([[1 - q1, q1], [1 - q2, q2]])
        w, v = np.linalg.eig(T.T)
        pi = np.real(v[:, np.argmin(abs(w - 1))])
        pi = pi / pi.sum()
        rate = sum(pi[i] * scipy_entropy(T[i], base=2) for i in range(2))
        assert markov2_stationary(q1, q2) == pytest.approx(tuple(pi), abs=1e-12)
        assert markov2_entropy_rate(q1, q2) == pytest.approx(rate, abs=1e-12)
    assert markov2_entropy_rate(0.0, 0.3) == 0.0


def test_plugin_conditional_entropy_on_simulated_chain():
    rng = np.random.default_rng(7)
    q1, q2 = 0.25, 0.5
    u = rng.random(200_000)
    s = np.zeros(u.size, dtype=int)
    for t in range(1, u.size):
        s[t] = int(u[t] < (q2 if s[t - 1] else q1))
    assert plugin_conditional_entropy(s) == pytest.approx(markov2_entropy_rate(q1, q2), abs=5e-3)
    with pytest.raises(ValueError):
        plugin_conditional_entropy([1], lag=1)


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_data_processing_inequality(seed):
    rng = np.random.default_rng(seed)
    # X -> Y -> Z Markov chain: I(X;Z) <= I(X;Y)
    px = rng.dirichlet(np.ones(3))
    wy = rng.dirichlet(np.ones(3), size=3)
    wz = rng.dirichlet(np.ones(2), size=3)
    j = np.einsum("x,xy,yz->xyz", px, wy, wz)
    assert mutual_info(j, 0, 2) <= mutual_info(j, 0, 1) + 1e-9
