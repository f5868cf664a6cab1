from models import MODELS, generate_synthetic, get_model
from models.expensive import SyntheticExpensiveModel
from models.linear import LinearGaussianModel
from models.targets import (
    GammaTarget,
    MixtureTarget,
    gamma_moments,
    get_target,
    mixture_moments,
)
from models.toys import AbsLogModel, GrowthModel
from scipy.integrate import quad
from smc.core import RngStream
from smc.filters import EvaluationCounter
from utils.errors import MomentOrderError, UnknownTarget

import numpy as np
import pytest


@pytest.mark.parametrize('k, expected', [(1, 2.0), (2, 5.0), (3, 15.0), (4, 52.5), (5, 210.0)])
def test_gamma_moments(k, expected):
    assert gamma_moments(k) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize('k, expected', [(1, 1.0), (2, 10.625)])
def test_mixture_moments(k, expected):
    assert mixture_moments(k) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize('target', [GammaTarget(), MixtureTarget()], ids=['gamma', 'mixture'])
@pytest.mark.parametrize('k', range(1, 6))
def test_moments_match_quadrature(target, k):
    lo, hi = (0.0, 200.0) if target.name == 'gamma' else (-30.0, 30.0)
    value, _ = quad(lambda x: x**k * np.exp(target.log_density(x)), lo, hi, limit=200)
    assert target.moment(k) == pytest.approx(value, rel=1e-8)


@pytest.mark.parametrize('target', [GammaTarget(), MixtureTarget()], ids=['gamma', 'mixture'])
def test_target_sampling_mean(target):
    samples = target.sample(200_000, RngStream(1))
    se = samples.std() / np.sqrt(len(samples))
    assert abs(samples.mean() - target.moment(1)) <= 4 * se


def test_target_lookup():
    assert isinstance(get_target('gamma'), GammaTarget)
    with pytest.raises(UnknownTarget):
        get_target('cauchy')

    with pytest.raises(MomentOrderError):
        gamma_moments(6)


def test_gamma_density_outside_support():
    assert GammaTarget().log_density(np.array([-1.0]))[0] == -np.inf


def test_abslog_likelihood():
    model = AbsLogModel()
    states = np.array([[1.0], [np.e]])
    values = model.log_likelihood(states, np.array([0.0]), 1)
    expected = [-0.5 * np.log(2 * np.pi), -0.5 * np.log(2 * np.pi) - 2.0]
    np.testing.assert_allclose(values, expected)


def test_abslog_origin_stays_finite():
    values = AbsLogModel().log_likelihood(np.zeros((3, 1)), np.array([0.0]), 1)
    assert np.all(np.isfinite(values))


def test_growth_drift():
    model = GrowthModel()
    assert model.drift(np.array([1.0]), 0)[0] == pytest.approx(0.5 + 12.5 + 8.0)


def test_growth_transition_noise():
    model = GrowthModel()
    states = np.zeros((100_000, 1))
    moved = model.sample_transition(states, 1, RngStream(2))
    assert moved.mean() == pytest.approx(8 * np.cos(1.2), abs=0.05)
    assert moved.var() == pytest.approx(10.0, rel=0.03)


def test_linear_model_sampling():
    model = LinearGaussianModel(a=0.5, q=2.0)
    moved = model.sample_transition(np.ones((100_000, 1)), 1, RngStream(3))
    assert moved.mean() == pytest.approx(0.5, abs=0.02)
    assert moved.var() == pytest.approx(2.0, rel=0.03)


def test_get_model():
    assert set(MODELS) == {'abslog', 'growth', 'linear', 'kepler'}
    assert isinstance(get_model('growth'), GrowthModel)
    assert get_model('kepler', objects=2).dim == 11

    with pytest.raises(UnknownTarget):
        get_model('lorenz')

    wrapped = get_model('abslog', cost=3)
    assert isinstance(wrapped, SyntheticExpensiveModel)
    assert isinstance(wrapped.inner, AbsLogModel)
    assert wrapped.horizon == 100


def test_expensive_model_keeps_likelihood_values():
    inner = GrowthModel()
    wrapped = SyntheticExpensiveModel(inner, cost=50)
    states = np.linspace(-5, 5, 40).reshape(-1, 1)
    counter = EvaluationCounter()
    np.testing.assert_array_equal(
        wrapped.evaluate(states, np.array([1.0]), 3, counter),
        inner.log_likelihood(states, np.array([1.0]), 3),
    )
    assert counter.count == 40

    with pytest.raises(ValueError):
        SyntheticExpensiveModel(inner, cost=-1)


def test_generate_synthetic_is_reproducible():
    model = GrowthModel()
    a = generate_synthetic(model, 20, RngStream(4))
    b = generate_synthetic(model, 20, RngStream(4))
    for left, right in zip(a, b):
        np.testing.assert_array_equal(left, right)

    states, observations = a
    assert states.shape == (21, 1)
    assert observations.shape == (20, 1)


def test_generate_synthetic_initial_state():
    states, _ = generate_synthetic(GrowthModel(), 3, RngStream(5), initial=[7.0])
    assert states[0, 0] == 7.0


def test_target_parameters():
    gamma = GammaTarget()
    assert (gamma.alpha, gamma.kappa) == (4.0, 0.5)

    mixture = MixtureTarget()
    assert len(mixture.weights) == len(mixture.means) == len(mixture.variances) == 2
    assert sum(mixture.weights) == pytest.approx(1.0)


def test_abslog_observes_log_square():
    model = AbsLogModel(obs_var=1e-12)
    y = model.sample_observation(np.array([-3.0]), 1, RngStream(6))
    assert y[0] == pytest.approx(np.log(9.0), abs=1e-4)
