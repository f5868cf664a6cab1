"""Compression of weighted clouds into summary clouds.

Regions come from a partition of the support. Each retained region m gets a
summary weight ``a_hat[m]`` (its share of the normalized mass), an
unnormalized weight ``a[m] = Z_m`` (its share of the evidence, so that
``sum(a) == Z``), and a summary particle chosen stochastically, as the
weighted region mean, or as the weighted region mean of ``h``.

The evidence identity is the plain sum ``sum_m Z_m = Z``. Writing it as an
average ``(1/M) sum_m a_m`` would need ``a_m = M * Z_m``; ``masses`` keeps the
sum form.
"""

from dataclasses import dataclass, replace
from enum import Enum
from scipy.special import logsumexp
from smc import partition as partitions
from smc.core import (
    EvidenceEstimate,
    RngStream,
    WeightedCloud,
    draw_categorical,
    identity,
)
from smc.partition import IndexSets, PartitionKind
from typing import Callable, Optional
from utils.errors import AllWeightsZero, ArgumentError, ProvenanceMismatch

import numpy as np


class SelectionMode(str, Enum):
    STOCHASTIC = 'stoch'
    WEIGHTED_MEAN = 'mean'
    FUNCTION_SPECIFIC = 'function'


@dataclass(frozen=True)
class PartialWeights:
    labels: np.ndarray
    weights: np.ndarray  # w_bar[m, i] stored per sample i

    def region(self, m: int) -> np.ndarray:
        return self.weights[self.labels == m]


@dataclass(frozen=True)
class SummaryCloud:
    particles: np.ndarray
    weights: np.ndarray
    log_masses: np.ndarray
    provenance: SelectionMode
    counts: np.ndarray
    regions: np.ndarray  # Index of each summary particle's region in the IndexSets
    covariances: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def masses(self) -> np.ndarray:
        return np.exp(self.log_masses)

    @property
    def dim(self) -> int:
        return self.particles.shape[1] if self.particles.ndim == 2 else 1

    @property
    def evidence(self) -> EvidenceEstimate:
        if np.all(self.log_masses == -np.inf):
            return EvidenceEstimate(log_z=-np.inf, terms=self.masses)

        return EvidenceEstimate(
            log_z=float(logsumexp(self.log_masses)), terms=self.masses
        )

    def reweighted(self, weights: np.ndarray) -> 'SummaryCloud':
        return replace(self, weights=np.asarray(weights, dtype=float))


def _region_logsumexp(log_w: np.ndarray, labels: np.ndarray, n: int) -> np.ndarray:
    peak = np.full(n, -np.inf)
    np.maximum.at(peak, labels, log_w)
    shift = np.where(np.isfinite(peak), peak, 0.0)
    total = np.bincount(labels, weights=np.exp(log_w - shift[labels]), minlength=n)
    with np.errstate(divide='ignore'):
        return np.log(total) + shift


def summary_weights(cloud: WeightedCloud, idx: IndexSets) -> tuple:
    """Return ``(a_hat, log_a)`` per region of ``idx``.

    Regions whose members all carry zero weight get ``a_hat = 0`` and are
    left out of any summary cloud built from them.
    """
    if np.all(cloud.log_weights == -np.inf):
        raise AllWeightsZero(len(cloud))

    log_region = _region_logsumexp(cloud.log_weights, idx.labels, len(idx))
    a_hat = np.exp(log_region - logsumexp(cloud.log_weights))
    log_a = log_region - np.log(len(cloud))
    return a_hat, log_a


def partial_weights(cloud: WeightedCloud, idx: IndexSets) -> PartialWeights:
    log_region = _region_logsumexp(cloud.log_weights, idx.labels, len(idx))
    dead = log_region == -np.inf
    weights = np.exp(
        cloud.log_weights - np.where(dead, 0.0, log_region)[idx.labels]
    )

    # Zero-mass regions fall back to the unweighted rule 1/|J_m|
    orphans = dead[idx.labels]
    weights[orphans] = 1.0 / idx.counts[idx.labels[orphans]]
    return PartialWeights(labels=idx.labels, weights=weights)


def _summarize(
    cloud: WeightedCloud,
    idx: IndexSets,
    particles: np.ndarray,
    provenance: SelectionMode,
) -> SummaryCloud:
    a_hat, log_a = summary_weights(cloud, idx)
    kept = np.flatnonzero(a_hat > 0)
    return SummaryCloud(
        particles=particles[kept],
        weights=a_hat[kept],
        log_masses=log_a[kept],
        provenance=provenance,
        counts=idx.counts[kept],
        regions=kept,
    )


def select_stochastic(
    cloud: WeightedCloud, idx: IndexSets, pw: PartialWeights, rng: RngStream
) -> SummaryCloud:
    a_hat, _ = summary_weights(cloud, idx)
    particles = np.zeros((len(idx), cloud.dim))
    for m, members in enumerate(idx.sets):
        if a_hat[m] <= 0:  # Dropped regions consume no draws
            continue

        pick = draw_categorical(pw.weights[members], 1, rng)[0]
        particles[m] = cloud.samples[members[pick]]

    return _summarize(cloud, idx, particles, SelectionMode.STOCHASTIC)


def _region_means(idx: IndexSets, pw: PartialWeights, values: np.ndarray) -> np.ndarray:
    means = np.zeros((len(idx),) + values.shape[1:])
    if values.ndim == 1:
        np.add.at(means, idx.labels, pw.weights * values)
    else:
        np.add.at(means, idx.labels, pw.weights[:, None] * values)

    return means


def select_weighted_mean(
    cloud: WeightedCloud, idx: IndexSets, pw: PartialWeights
) -> SummaryCloud:
    particles = _region_means(idx, pw, cloud.samples)
    return _summarize(cloud, idx, particles, SelectionMode.WEIGHTED_MEAN)


def select_function_specific(
    cloud: WeightedCloud, idx: IndexSets, pw: PartialWeights, h: Callable
) -> SummaryCloud:
    values = np.asarray(h(cloud.samples), dtype=float)
    particles = _region_means(idx, pw, values)
    return _summarize(cloud, idx, particles, SelectionMode.FUNCTION_SPECIFIC)


def cmc_estimate(sc: SummaryCloud, h: Optional[Callable] = None):
    if sc.provenance is SelectionMode.FUNCTION_SPECIFIC:
        if h is not None and h is not identity:
            raise ProvenanceMismatch(sc.provenance.value)
        h = identity

    values = sc.particles if h is None else np.asarray(h(sc.particles), dtype=float)
    result = sc.weights @ values
    return float(result) if np.ndim(result) == 0 else result


def region_covariances(
    cloud: WeightedCloud, idx: IndexSets, pw: PartialWeights, eps: float
) -> np.ndarray:
    if eps <= 0:
        raise ArgumentError(f'Covariance regularizer must be positive, got {eps}.')

    means = _region_means(idx, pw, cloud.samples)
    spread = cloud.samples - means[idx.labels]
    covariances = np.zeros((len(idx), cloud.dim, cloud.dim))
    np.add.at(
        covariances,
        idx.labels,
        pw.weights[:, None, None] * spread[:, :, None] * spread[:, None, :],
    )
    return covariances + eps * np.eye(cloud.dim)


def compress(
    cloud: WeightedCloud,
    m: int,
    kind: PartitionKind = PartitionKind.UNIFORM_GRID,
    mode: SelectionMode = SelectionMode.WEIGHTED_MEAN,
    rng: Optional[RngStream] = None,
    h: Optional[Callable] = None,
    eps: Optional[float] = None,
) -> SummaryCloud:
    """Build a partition, then summarize the cloud over it.

    Partition construction and stochastic selection draw from two separate
    children of ``rng``. When ``eps`` is given the region covariances are
    attached for regularized resampling.
    """
    mode = SelectionMode(mode)
    rng = rng if rng is not None else RngStream(0)
    partition = partitions.build(kind, cloud, m, rng.child(0))
    idx = partitions.assign(partition, cloud)
    pw = partial_weights(cloud, idx)

    if mode is SelectionMode.STOCHASTIC:
        sc = select_stochastic(cloud, idx, pw, rng.child(1))
    elif mode is SelectionMode.FUNCTION_SPECIFIC:
        sc = select_function_specific(cloud, idx, pw, h or identity)
    else:
        sc = select_weighted_mean(cloud, idx, pw)

    if eps is not None:
        if mode is SelectionMode.FUNCTION_SPECIFIC:
            raise ProvenanceMismatch(mode.value)

        covariances = region_covariances(cloud, idx, pw, eps)
        sc = replace(sc, covariances=covariances[sc.regions])

    return sc
