from smc.cmc import SelectionMode, SummaryCloud, compress
from smc.core import RngStream, WeightedCloud
from smc.resample import (
    ResampleMode,
    ResamplePlan,
    ResampleScheme,
    resample,
    resample_indices,
    resample_multinomial,
    resample_regularized,
)
from utils.errors import ArgumentError, CovarianceNotSPD, ProvenanceMismatch

import numpy as np
import pytest


def summaries(particles, weights, covariances=None, provenance=SelectionMode.WEIGHTED_MEAN):
    particles = np.asarray(particles, dtype=float).reshape(len(weights), -1)
    weights = np.asarray(weights, dtype=float)
    return SummaryCloud(
        particles=particles,
        weights=weights,
        log_masses=np.log(weights),
        provenance=provenance,
        counts=np.ones(len(weights), dtype=int),
        regions=np.arange(len(weights)),
        covariances=None if covariances is None else np.asarray(covariances, dtype=float),
    )


def test_single_summary_is_copied():
    out = resample_multinomial(summaries([[1.5, -2.0]], [1.0]), 25, RngStream(0))
    np.testing.assert_array_equal(out, np.tile([1.5, -2.0], (25, 1)))


def test_multinomial_frequency():
    n = 100_000
    out = resample_multinomial(summaries([0.0, 1.0], [0.25, 0.75]), n, RngStream(1))
    frequency = np.mean(out[:, 0] == 1.0)
    assert abs(frequency - 0.75) <= 3 * np.sqrt(0.1875 / n)


@pytest.mark.parametrize('scheme', list(ResampleScheme))
def test_zero_weight_never_drawn(scheme):
    picks = resample_indices(np.array([0.5, 0.0, 0.5, 0.0]), 10_000, RngStream(2), scheme)
    assert set(np.unique(picks)) <= {0, 2}


def test_systematic_counts_are_balanced():
    weights = np.array([0.1, 0.2, 0.3, 0.4])
    picks = resample_indices(weights, 1000, RngStream(3), ResampleScheme.SYSTEMATIC)
    counts = np.bincount(picks, minlength=4)
    assert np.all(np.abs(counts - 1000 * weights) <= 1)


def test_multinomial_preserves_expectation():
    sc = compress(WeightedCloud(np.random.default_rng(5).normal(size=300)), 10)
    n = 50_000
    out = resample_multinomial(sc, n, RngStream(4))
    h = np.sin(out[:, 0])
    expected = sc.weights @ np.sin(sc.particles[:, 0])
    assert abs(h.mean() - expected) <= 3.5 * h.std() / np.sqrt(n)


def test_regularized_single_region_variance():
    out = resample_regularized(summaries([0.0], [1.0], [[[1.0]]]), 100_000, RngStream(6))
    assert out.var() == pytest.approx(1.0, abs=0.05)


def test_regularized_tiny_kernel_mean():
    eps = 1e-8
    sc = summaries([[-1.0, 2.0], [3.0, 0.5]], [0.4, 0.6], eps * np.tile(np.eye(2), (2, 1, 1)))
    n = 100_000
    out = resample_regularized(sc, n, RngStream(7))
    mixture_mean = sc.weights @ sc.particles
    mixture_sd = np.sqrt(sc.weights @ (sc.particles - mixture_mean) ** 2 + eps)
    np.testing.assert_array_less(np.abs(out.mean(axis=0) - mixture_mean), 4 * mixture_sd / np.sqrt(n))
    # Draws sit within a few kernel widths of a summary particle
    nearest = np.min(np.abs(out[:, None, :] - sc.particles[None]).max(axis=2), axis=1)
    assert nearest.max() <= 10 * np.sqrt(eps)


def test_regularized_is_reproducible():
    sc = summaries([0.0, 5.0], [0.5, 0.5], [[[0.3]], [[2.0]]])
    a = resample_regularized(sc, 100, RngStream(8))
    b = resample_regularized(sc, 100, RngStream(8))
    c = resample_regularized(sc, 100, RngStream(9))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_regularized_rejects_indefinite_covariance():
    sc = summaries([0.0, 1.0], [0.5, 0.5], [[[1.0]], [[-1.0]]])
    with pytest.raises(CovarianceNotSPD) as info:
        resample_regularized(sc, 10, RngStream(0))

    assert info.value.region == 1


def test_regularized_needs_covariances():
    with pytest.raises(ArgumentError):
        resample_regularized(summaries([0.0], [1.0]), 10, RngStream(0))


def test_function_specific_summaries_cannot_be_resampled():
    sc = summaries([1.0], [1.0], provenance=SelectionMode.FUNCTION_SPECIFIC)
    with pytest.raises(ProvenanceMismatch):
        resample_multinomial(sc, 3, RngStream(0))

    with pytest.raises(ProvenanceMismatch):
        resample(sc, 3, RngStream(0), ResamplePlan(ResampleMode.REGULARIZED))


def test_plan_validation():
    with pytest.raises(ArgumentError):
        ResamplePlan(ResampleMode.REGULARIZED, eps=0.0)

    plan = ResamplePlan('regularized', 1e-3, 'systematic')
    assert plan.regularized and plan.scheme is ResampleScheme.SYSTEMATIC


def test_resample_dispatch():
    sc = summaries([0.0, 1.0], [0.5, 0.5], 1e-6 * np.ones((2, 1, 1)))
    plain = resample(sc, 50, RngStream(1))
    assert set(np.unique(plain)) <= {0.0, 1.0}

    smoothed = resample(sc, 50, RngStream(1), ResamplePlan(ResampleMode.REGULARIZED))
    assert not set(np.unique(smoothed)) <= {0.0, 1.0}
