from models.targets import GammaTarget
from smc import partition as partitions
from smc.cmc import (
    SelectionMode,
    cmc_estimate,
    compress,
    partial_weights,
    region_covariances,
    select_stochastic,
    select_weighted_mean,
    summary_weights,
)
from smc.core import RngStream, WeightedCloud, evidence_estimate, is_estimate
from smc.partition import PartitionKind
from utils.errors import AllWeightsZero, ArgumentError, ProvenanceMismatch

import numpy as np
import pytest


INTEGRANDS = {
    'x': lambda x: x[:, 0],
    'x2': lambda x: x[:, 0] ** 2,
    'sin': lambda x: np.sin(x[:, 0]),
    'indicator': lambda x: (x[:, 0] > 0.3).astype(float),
}


def random_cloud(seed: int, dim: int = 1) -> WeightedCloud:
    generator = np.random.default_rng(seed)
    n = int(generator.integers(5, 300))
    samples = generator.normal(scale=3.0, size=(n, dim))
    log_weights = generator.normal(scale=3.0, size=n)
    return WeightedCloud(samples, log_weights)


def index_sets(cloud, m, kind=PartitionKind.UNIFORM_GRID, rng=None):
    partition = partitions.build(kind, cloud, m, rng or RngStream(0))
    return partitions.assign(partition, cloud)


def test_summary_weights_direct_sums():
    cloud = WeightedCloud.from_weights([1.0, 2.0, 3.0, 4.0], [0.1, 0.2, 0.3, 0.4])
    a_hat, log_a = summary_weights(cloud, index_sets(cloud, 2))
    np.testing.assert_allclose(a_hat, [0.3, 0.7], atol=1e-12)
    np.testing.assert_allclose(np.exp(log_a), [0.3 / 4, 0.7 / 4], atol=1e-12)


def test_summary_weights_uniform_cloud_counts():
    cloud = WeightedCloud(np.random.default_rng(2).normal(size=100))
    idx = index_sets(cloud, 8)
    a_hat, _ = summary_weights(cloud, idx)
    np.testing.assert_allclose(a_hat, idx.counts / 100, atol=1e-12)


def test_summary_weights_all_zero():
    cloud = WeightedCloud([1.0, 2.0], [-np.inf, -np.inf])
    with pytest.raises(AllWeightsZero):
        summary_weights(cloud, index_sets(cloud, 1))


@pytest.mark.parametrize(
    'samples, weights, expected',
    [
        ([1.0, 1.5], [2.0, 6.0], [0.25, 0.75]),
        ([1.0, 1.1, 1.2, 1.3, 1.4], [1.0] * 5, [0.2] * 5),
        ([4.0], [3.0], [1.0]),
    ],
)
def test_partial_weights_single_region(samples, weights, expected):
    cloud = WeightedCloud.from_weights(samples, weights)
    pw = partial_weights(cloud, index_sets(cloud, 1))
    np.testing.assert_allclose(pw.region(0), expected, atol=1e-12)


def test_partial_weights_sum_to_one_per_region(weighted_cloud):
    idx = index_sets(weighted_cloud, 20)
    pw = partial_weights(weighted_cloud, idx)
    sums = np.bincount(idx.labels, weights=pw.weights)
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)


@pytest.mark.parametrize(
    'samples, weights, expected',
    [
        ([1.0, 3.0], [0.25, 0.75], 2.5),
        ([-2.0, 2.0], [1.0, 1.0], 0.0),
        ([7.0], [1.0], 7.0),
    ],
)
def test_weighted_mean_selection(samples, weights, expected):
    cloud = WeightedCloud.from_weights(samples, weights)
    idx = index_sets(cloud, 1)
    sc = select_weighted_mean(cloud, idx, partial_weights(cloud, idx))
    assert sc.particles[0, 0] == pytest.approx(expected, abs=1e-12)
    assert sc.provenance is SelectionMode.WEIGHTED_MEAN


def test_weighted_mean_lies_in_region_hull(weighted_cloud):
    idx = index_sets(weighted_cloud, 9)
    sc = select_weighted_mean(weighted_cloud, idx, partial_weights(weighted_cloud, idx))
    for particle, region in zip(sc.particles, sc.regions):
        members = weighted_cloud.samples[idx.sets[region]]
        assert np.all(particle >= members.min(axis=0) - 1e-12)
        assert np.all(particle <= members.max(axis=0) + 1e-12)


def test_function_specific_selection():
    cloud = WeightedCloud([1.0, 3.0])
    sc = compress(cloud, 1, mode=SelectionMode.FUNCTION_SPECIFIC, h=INTEGRANDS['x2'])
    assert sc.particles[0] == pytest.approx(5.0)
    assert sc.provenance is SelectionMode.FUNCTION_SPECIFIC


def test_function_specific_identity_matches_weighted_mean(weighted_cloud):
    mean = compress(weighted_cloud, 10, mode=SelectionMode.WEIGHTED_MEAN)
    specific = compress(weighted_cloud, 10, mode=SelectionMode.FUNCTION_SPECIFIC)
    np.testing.assert_allclose(specific.particles, mean.particles, atol=1e-12)


@pytest.mark.parametrize('name', sorted(INTEGRANDS))
@pytest.mark.parametrize('kind', list(PartitionKind))
@pytest.mark.parametrize('seed', range(25))
def test_function_specific_reconstructs_is_estimate(name, kind, seed):
    cloud = random_cloud(seed)
    h = INTEGRANDS[name]
    m = 1 + seed % len(cloud)
    sc = compress(cloud, m, kind, SelectionMode.FUNCTION_SPECIFIC, RngStream(seed), h=h)
    assert cmc_estimate(sc) == pytest.approx(is_estimate(cloud, h), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize('mode', [SelectionMode.STOCHASTIC, SelectionMode.WEIGHTED_MEAN])
@pytest.mark.parametrize('kind', list(PartitionKind))
@pytest.mark.parametrize('seed', range(20))
def test_compression_preserves_evidence(mode, kind, seed):
    cloud = random_cloud(seed, dim=2)
    m = 1 + (7 * seed) % len(cloud)
    sc = compress(cloud, m, kind, mode, RngStream(seed))

    assert sc.evidence.log_z == pytest.approx(evidence_estimate(cloud).log_z, abs=1e-12)
    assert sc.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(sc.weights > 0)


def test_zero_mass_regions_are_dropped():
    cloud = WeightedCloud([0.0, 1.0, 10.0, 11.0], [0.0, 0.0, -np.inf, -np.inf])
    sc = compress(cloud, 2, PartitionKind.UNIFORM_GRID, SelectionMode.WEIGHTED_MEAN)
    assert len(sc) == 1
    assert sc.particles[0, 0] == pytest.approx(0.5)
    np.testing.assert_array_equal(sc.counts, [2])


@pytest.mark.parametrize('mode', [SelectionMode.STOCHASTIC, SelectionMode.WEIGHTED_MEAN])
def test_proper_partition_returns_source_cloud(mode):
    n = 40
    generator = np.random.default_rng(1)
    samples = generator.permutation(np.arange(n, dtype=float))
    cloud = WeightedCloud(samples, generator.normal(size=n))
    sc = compress(cloud, n, PartitionKind.UNIFORM_GRID, mode, RngStream(3))

    np.testing.assert_array_equal(sc.particles[:, 0], samples)
    np.testing.assert_allclose(sc.weights, cloud.normalized, atol=1e-12)
    np.testing.assert_array_equal(sc.counts, np.ones(n))


def test_stochastic_selection_frequency():
    cloud = WeightedCloud.from_weights([0.0, 4.0], [0.25, 0.75])
    idx = index_sets(cloud, 1)
    pw = partial_weights(cloud, idx)
    repeats = 20_000
    picks = [
        select_stochastic(cloud, idx, pw, RngStream(5, k)).particles[0, 0]
        for k in range(repeats)
    ]
    frequency = np.mean(np.asarray(picks) == 4.0)
    assert abs(frequency - 0.75) <= 4 * np.sqrt(0.75 * 0.25 / repeats)


def test_stochastic_selection_is_unbiased():
    cloud = random_cloud(11)
    h = INTEGRANDS['x2']
    idx = index_sets(cloud, 6)
    pw = partial_weights(cloud, idx)
    estimates = np.array(
        [
            cmc_estimate(select_stochastic(cloud, idx, pw, RngStream(8, k)), h)
            for k in range(10_000)
        ]
    )
    se = estimates.std(ddof=1) / np.sqrt(len(estimates))
    assert abs(estimates.mean() - is_estimate(cloud, h)) <= 4 * se


def test_convex_combination_of_region_estimates(weighted_cloud):
    h = INTEGRANDS['sin']
    idx = index_sets(weighted_cloud, 12)
    pw = partial_weights(weighted_cloud, idx)
    a_hat, _ = summary_weights(weighted_cloud, idx)
    values = h(weighted_cloud.samples)
    regional = np.array([pw.region(m) @ values[idx.labels == m] for m in range(len(idx))])
    assert a_hat @ regional == pytest.approx(is_estimate(weighted_cloud, h), abs=1e-12)


def test_cmc_estimate_single_summary():
    sc = compress(WeightedCloud([2.0, 4.0]), 1)
    assert cmc_estimate(sc, lambda s: s[:, 0] ** 2) == pytest.approx(9.0)


def test_cmc_estimate_rejects_function_on_function_summaries(weighted_cloud):
    sc = compress(weighted_cloud, 5, mode=SelectionMode.FUNCTION_SPECIFIC, h=INTEGRANDS['x'])
    with pytest.raises(ProvenanceMismatch):
        cmc_estimate(sc, INTEGRANDS['x2'])

    with pytest.raises(ProvenanceMismatch):
        compress(weighted_cloud, 5, mode=SelectionMode.FUNCTION_SPECIFIC, eps=1e-6)


def test_region_covariance_singleton():
    cloud = WeightedCloud([3.0])
    idx = index_sets(cloud, 1)
    covariances = region_covariances(cloud, idx, partial_weights(cloud, idx), 1e-6)
    np.testing.assert_allclose(covariances, [[[1e-6]]], rtol=1e-12)


def test_region_covariance_symmetric_pair():
    cloud = WeightedCloud([-1.0, 1.0])
    idx = index_sets(cloud, 1)
    covariances = region_covariances(cloud, idx, partial_weights(cloud, idx), 1e-15)
    assert covariances[0, 0, 0] == pytest.approx(1.0, abs=1e-12)


def test_region_covariance_matches_weighted_oracle(weighted_cloud):
    idx = index_sets(weighted_cloud, 4)
    pw = partial_weights(weighted_cloud, idx)
    eps = 1e-6
    covariances = region_covariances(weighted_cloud, idx, pw, eps)
    for m, members in enumerate(idx.sets):
        x = weighted_cloud.samples[members]
        w = weighted_cloud.normalized[members]
        oracle = np.cov(x, rowvar=False, aweights=w, bias=True) if len(x) > 1 else np.zeros((2, 2))
        np.testing.assert_allclose(covariances[m], oracle + eps * np.eye(2), atol=1e-10)
        assert np.all(np.linalg.eigvalsh(covariances[m]) > 0)


def test_region_covariance_needs_positive_eps(weighted_cloud):
    idx = index_sets(weighted_cloud, 3)
    with pytest.raises(ArgumentError):
        region_covariances(weighted_cloud, idx, partial_weights(weighted_cloud, idx), 0.0)


def test_compress_attaches_covariances(weighted_cloud):
    sc = compress(weighted_cloud, 6, eps=1e-4)
    assert sc.covariances.shape == (len(sc), 2, 2)
    np.testing.assert_allclose(sc.covariances, np.swapaxes(sc.covariances, 1, 2))


@pytest.mark.slow
def test_cmc_estimate_is_consistent():
    target = GammaTarget()
    errors = list()
    for n in (100, 1000, 10_000):
        squared = list()
        for run in range(200):
            cloud = WeightedCloud(target.sample(n, RngStream(17, run)))
            sc = compress(cloud, n, PartitionKind.UNIFORM_GRID, SelectionMode.WEIGHTED_MEAN)
            squared.append((cmc_estimate(sc, lambda s: s[:, 0]) - target.moment(1)) ** 2)

        errors.append(np.sqrt(np.mean(squared)))

    for coarse, fine in zip(errors, errors[1:]):
        assert np.sqrt(10) / 2 <= coarse / fine <= 2 * np.sqrt(10)
