import json

import numpy as np
import pytest

from crlab.auxdist import AuxDist, cardinality_caps
from crlab.channel import (BscTwoWayParams, ChannelError, RdChannel, bsc, bsc_params_of,
                           induced_joint, is_decomposing, load_channel, parse_channel_spec,
                           step, validate)
from crlab.infomeasures import DistributionError
from crlab.simplex import project_simplex

from conftest import random_channel, random_decomposing


def test_bsc_kernel_layout():
    ch = bsc(0.1, 0.2, 0.3, 0.4)
    # y1 reads x2 through BSC(p1) when x1 = 0
    assert ch.w1[0, 1, 0] == pytest.approx(0.1)
    assert ch.w1[1, 0, 1] == pytest.approx(0.2)
    # y2 reads x1 through BSC(q2) when x2 = 1
    assert ch.w2[1, 1, 0] == pytest.approx(0.4)
    assert ch.w2[0, 0, 1] == pytest.approx(0.3)
    assert bsc_params_of(ch) == BscTwoWayParams(0.1, 0.2, 0.3, 0.4)


def test_bsc_parameters_range():
    with pytest.raises(ChannelError):
        bsc(0.6, 0, 0, 0)


def test_bsc_params_of_rejects_general_kernels(rng):
    assert bsc_params_of(random_channel(rng, 3, 2)) is None
    assert bsc_params_of(random_channel(rng)) is None


def test_validate_reports_every_bad_row():
    w1 = np.full((2, 2, 2), 0.5)
    w2 = np.full((2, 2, 2), 0.5)
    w1[0, 1] = [0.7, 0.7]
    w2[1, 0] = [1.5, -0.5]
    probs = validate(RdChannel(w1, w2))
    assert len(probs) == 2
    assert "w1[x1=0][x2=1]" in probs[0] and "w2[x1=1][x2=0]" in probs[1]
    with pytest.raises(ChannelError) as exc:
        RdChannel.from_kernels(w1, w2)
    assert len(exc.value.violations) == 2


def test_from_kernels_renormalizes_small_drift():
    w = np.full((2, 2, 2), 0.5)
    w[0, 0] = [0.5, 0.5 + 4e-10]
    ch = RdChannel.from_kernels(w, w)
    np.testing.assert_allclose(ch.w1.sum(axis=2), 1.0, atol=1e-15)


def test_is_decomposing(rng):
    assert is_decomposing(bsc(0.1, 0.1, 0.3, 0.3))
    assert not is_decomposing(bsc(0.0, 0.5, 0.0, 0.5))
    assert is_decomposing(random_decomposing(rng, 3, 2, 4, 2))
    assert not is_decomposing(random_channel(rng))


def test_step_frequencies_match_kernels():
    ch = bsc(0.2, 0.2, 0.35, 0.35)
    rng = np.random.default_rng(3)
    n = 40_000
    ys = np.array([step(ch, 1, 0, rng) for _ in range(n)])
    # y1 = x2 flipped w.p. 0.2, y2 = x1 flipped w.p. 0.35
    for freq, p in ((ys[:, 0].mean(), 0.2), (1 - ys[:, 1].mean(), 0.35)):
        assert abs(freq - p) < 4 * np.sqrt(p * (1 - p) / n)
    with pytest.raises(ValueError):
        step(ch, 2, 0, rng)


def test_induced_joint_mass_and_marginals(rng):
    ch = random_channel(rng, 2, 3, 2, 4)
    aux = AuxDist.random(4, 3, 2, 3, rng)
    j = induced_joint(ch, aux)
    assert j.shape == (4, 3, 2, 3, 2, 4)
    assert j.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(j.sum(axis=(0, 1, 4, 5)), aux.input_joint(), atol=1e-14)
    with pytest.raises(ValueError):
        induced_joint(ch, AuxDist.random(2, 2, 3, 3, rng))


def test_channel_spec_roundtrip(tmp_path, rng):
    ch = random_channel(rng, 2, 3)
    spec = ch.to_dict()
    again = parse_channel_spec(json.loads(json.dumps(spec)))
    np.testing.assert_allclose(again.w1, ch.w1)
    p = tmp_path / "ch.json"
    p.write_text(json.dumps({"bsc": {"p1": 0, "p2": 0.5, "q1": 0, "q2": 0.5}}))
    assert bsc_params_of(load_channel(str(p))).as_tuple() == (0, 0.5, 0, 0.5)
    assert bsc_params_of(load_channel('{"bsc": {"p1": 0, "p2": 0, "q1": 0.1, "q2": 0.1}}'))


@pytest.mark.parametrize("spec", [
    {"bsc": {"p1": 0, "p2": 0}},
    {"kernels": {"w1": [[[1, 0]]]}},
    {"nothing": 1},
    {"kernels": {"w1": [[[0.3, 0.3], [1, 0]], [[1, 0], [0, 1]]],
                 "w2": [[[1, 0], [1, 0]], [[0, 1], [0, 1]]]}},
])
def test_bad_channel_specs(spec):
    with pytest.raises(ChannelError):
        parse_channel_spec(spec)


def test_load_channel_errors(tmp_path):
    with pytest.raises(ChannelError):
        load_channel(str(tmp_path / "missing.json"))
    with pytest.raises(ChannelError):
        load_channel("{not json")


def test_cardinality_caps():
    assert cardinality_caps(2, 2) == (10, 8)
    assert cardinality_caps(3, 2) == (21, 12)


def test_auxdist_validation_and_roundtrip(rng):
    aux = AuxDist.random(3, 2, 2, 2, rng)
    again = AuxDist.from_dict(aux.to_dict())
    np.testing.assert_allclose(again.puv, aux.puv, rtol=1e-11)
    with pytest.raises(DistributionError):
        AuxDist(np.ones((2, 2)), np.full((2, 2), 0.5), np.full((2, 2), 0.5))
    with pytest.raises(DistributionError):
        AuxDist(np.full((2, 2), 0.25), np.full((3, 2), 0.5), np.full((2, 2), 0.5))
    s = AuxDist.singleton([0.3, 0.7], [1.0, 0.0])
    np.testing.assert_allclose(s.input_joint(), [[0.3, 0.0], [0.7, 0.0]])


def _project_bisection(v):
    # find tau with sum(max(v - tau, 0)) = 1
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0).sum() > 1:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0)


def test_simplex_projection_matches_bisection(rng):
    for _ in range(200):
        v = rng.normal(size=rng.integers(1, 12)) * rng.choice([0.01, 1, 10])
        np.testing.assert_allclose(project_simplex(v), _project_bisection(v), atol=1e-12)


def test_simplex_projection_batched_and_idempotent(rng):
    V = rng.normal(size=(5, 4, 3))
    out = project_simplex(V)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-12)
    assert np.all(out >= 0)
    for idx in np.ndindex(5, 4):
        np.testing.assert_allclose(out[idx], _project_bisection(V[idx]), atol=1e-12)
    np.testing.assert_allclose(project_simplex(out), out, atol=1e-15)
