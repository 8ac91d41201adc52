import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from infoplan.belief import (
    FilterParams,
    ParticleBelief,
    downsample,
    estimate,
    logsumexp,
    measurement_loglik,
    predict,
    resample,
    systematic_indices,
    trace_position_cov,
    uniform_belief,
    update,
    update_with_loglik,
)
from infoplan.errors import DegenerateUpdateError
from infoplan.models import AgentState, Measurement, MotionModel, RssiModel

from .oracles import kalman_1d, particle_1d


def make_belief(positions, weights=None, model=None, existence=1.0, params=None):
    positions = np.asarray(positions, dtype=float)
    states = np.zeros((len(positions), 6))
    states[:, :2] = positions
    w = np.full(len(positions), 1.0 / len(positions)) if weights is None else np.asarray(weights, float)
    return ParticleBelief(states, w, existence, model or MotionModel("CV"), params=params or FilterParams())


def test_bayes_rule_on_two_atoms():
    b = make_belief([[0, 0], [1, 0]], params=FilterParams(resample_fraction=0.0))
    out = update_with_loglik(b, np.log([3.0, 1.0]), np.random.default_rng(0))
    np.testing.assert_allclose(out.weights, [0.75, 0.25])


def test_estimate_two_atoms():
    mean, cov = estimate(make_belief([[0, 0], [2, 0]]))
    np.testing.assert_allclose(mean, [1, 0])
    assert cov[0, 0] == pytest.approx(1.0)
    assert cov[1, 1] == 0.0


def test_estimate_identical_particles_zero_cov():
    _, cov = estimate(make_belief([[3, 4]] * 5))
    np.testing.assert_array_equal(cov, np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(0, 2**31))
def test_covariance_symmetric_psd(n, seed):
    rng = np.random.default_rng(seed)
    b = make_belief(rng.normal(size=(n, 2)) * 100, rng.dirichlet(np.ones(n)))
    _, cov = estimate(b)
    np.testing.assert_array_equal(cov, cov.T)
    assert np.linalg.eigvalsh(cov).min() >= -1e-12
    assert trace_position_cov(b) == pytest.approx(np.trace(cov))


def test_zero_noise_cv_predict_translates():
    rng = np.random.default_rng(1)
    b = uniform_belief(50, 100.0, MotionModel("CV"), rng, speed_interval=(1.0, 2.0))
    out = predict(b, 2.0, rng)
    np.testing.assert_allclose(out.positions, b.positions + 2.0 * b.states[:, 2:4])
    np.testing.assert_array_equal(out.weights, b.weights)


def test_predict_existence_recursion():
    b = make_belief([[0, 0]], existence=0.5)
    out = predict(b, 1.0, np.random.default_rng(0))
    assert out.existence == pytest.approx(0.01 * 0.5 + 0.99 * 0.5)


def test_particle_count_constant():
    rng = np.random.default_rng(2)
    b = uniform_belief(300, 500.0, MotionModel("RW", (1.0, 0.0)), rng)
    agent = AgentState(position=np.array([250.0, 250.0]))
    for _ in range(10):
        b = predict(b, 1.0, rng)
        b = update(b, Measurement(-40.0), agent, RssiModel(), rng)
        assert len(b) == 300 and b.weights.shape == (300,)
    b = resample(b, rng)
    assert len(b) == 300


def test_all_zero_weights_raise():
    b = make_belief([[0, 0], [1, 1]])
    with pytest.raises(DegenerateUpdateError):
        update_with_loglik(b, np.array([-np.inf, -np.inf]), np.random.default_rng(0))


def test_missed_detection_keeps_weights_and_lowers_existence():
    b = make_belief([[0, 0], [1, 1]], weights=[0.3, 0.7], existence=0.6)
    out = update(b, None, AgentState(position=np.zeros(2)), RssiModel(), np.random.default_rng(0))
    np.testing.assert_allclose(out.weights, b.weights)
    assert out.existence == pytest.approx(0.6 * 0.1 / (1 - 0.6 * 0.9))


def test_existence_rises_on_a_plausible_detection():
    rng = np.random.default_rng(3)
    b = make_belief([[100, 0]] * 10, existence=0.5)
    agent = AgentState(position=np.zeros(2))
    z = measurement_loglik(b, -40.0, agent, RssiModel())
    assert np.all(np.isfinite(z))
    mean = -7.0 - 15.0 * math.log10(math.hypot(100, 50)) - 0.5  # rough monopole gain
    out = update(b, Measurement(mean), agent, RssiModel(), rng)
    assert out.existence > 0.5


def test_systematic_indices_counts():
    rng = np.random.default_rng(0)
    w = np.array([0.5, 0.25, 0.25])
    idx = systematic_indices(w, 8, rng)
    counts = np.bincount(idx, minlength=3)
    # Systematic resampling keeps every count within one of n * w.
    assert np.all(np.abs(counts - 8 * w) < 1)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 400), st.integers(0, 2**31))
def test_downsample_and_resample_weights_uniform(n, seed):
    rng = np.random.default_rng(seed)
    b = make_belief(rng.normal(size=(n, 2)), rng.dirichlet(np.ones(n)))
    small = downsample(b, max(1, n // 2), rng)
    np.testing.assert_allclose(small.weights, 1.0 / len(small))
    r = resample(b, rng)
    np.testing.assert_allclose(r.weights.sum(), 1.0)
    assert len(r) == n


def test_downsample_preserves_estimate():
    rng = np.random.default_rng(4)
    b = make_belief(rng.normal(size=(4000, 2)) * [30, 10] + [500, 200], rng.dirichlet(np.ones(4000) * 5))
    m0, c0 = estimate(b)
    m1, c1 = estimate(downsample(b, 1000, rng))
    # Systematic draws keep the error well under the iid standard error.
    se = np.sqrt(np.diag(c0) / 1000)
    assert np.all(np.abs(m1 - m0) < 4 * se)
    np.testing.assert_allclose(np.diag(c1), np.diag(c0), rtol=0.15)


def test_downsample_rejects_bad_sizes():
    b = make_belief([[0, 0], [1, 1]])
    with pytest.raises(ValueError):
        downsample(b, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        downsample(b, 3, np.random.default_rng(0))


def test_json_round_trip():
    rng = np.random.default_rng(6)
    b = uniform_belief(20, 100.0, MotionModel("CV-IFT", (0.1, 0.2)), rng, (1, 2), (0.1, 0.2), existence=0.3)
    back = ParticleBelief.from_json(b.to_json())
    np.testing.assert_array_equal(back.states, b.states)
    np.testing.assert_array_equal(back.weights, b.weights)
    assert back.existence == b.existence
    assert back.model.kind == "CV-IFT"
    np.testing.assert_array_equal(back.model.imm_transition, b.model.imm_transition)


def test_json_rejects_unknown_format():
    with pytest.raises(ValueError):
        ParticleBelief.from_json('{"format": "other"}')


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-800, 50), min_size=1, max_size=50))
def test_logsumexp_matches_direct_sum(values):
    a = np.array(values)
    assert logsumexp(a) == pytest.approx(float(np.log(np.exp(a.astype(np.longdouble)).sum())), abs=1e-9)


def test_kalman_equivalence_small():
    rng = np.random.default_rng(7)
    zs = 3.0 + rng.normal(size=20)
    km, kp = kalman_1d(0.0, 4.0, 0.25, 1.0, zs)
    pm, pp = particle_1d(0.0, 4.0, 0.25, 1.0, zs, 20_000, rng)
    assert abs(pm - km) < 0.1 * math.sqrt(kp)
    assert abs(pp / kp - 1) < 0.1


def test_uniform_belief_ranges():
    rng = np.random.default_rng(8)
    b = uniform_belief(1000, 1000.0, MotionModel("CV-IFT"), rng, (2.5, 3.0), (0.17, 0.26))
    assert b.positions.min() >= 0 and b.positions.max() <= 1000
    speed = np.hypot(b.states[:, 2], b.states[:, 3])
    assert speed.min() >= 2.5 and speed.max() <= 3.0
    assert np.all(b.states[:, 5] == 0)
    assert b.existence == 0.5
