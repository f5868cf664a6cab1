"""Weighted sample containers, normalization, ESS diagnostics and estimators.

All weights are held in the log domain. A log-weight of ``-inf`` encodes a
sample that violates an indicator constraint.

Integrands ``h`` are vectorized: they map an ``(n, d)`` array of samples to
``n`` values (or to an ``(n, v)`` array, which is then estimated
componentwise).
"""

from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from scipy.special import logsumexp
from typing import Callable, Optional
from utils.errors import AllWeightsZero, DataError, DimensionMismatch

import numpy as np


U64 = 2**64


def identity(x: np.ndarray) -> np.ndarray:
    return x


class RngStream:
    """Seeded random stream addressed by ``(seed, stream, *path)``.

    Children are derived through ``numpy.random.SeedSequence`` spawn keys, so a
    given address always reproduces the same draws regardless of which thread
    or process consumes it.
    """

    def __init__(self, seed: int, stream: int = 0, path: tuple = ()):
        if not (0 <= int(seed) < U64 and 0 <= int(stream) < U64):
            raise ValueError('Seed and stream id must be 64-bit unsigned integers.')

        self.seed = int(seed)
        self.stream = int(stream)
        self.path = tuple(int(p) for p in path)

    def __repr__(self) -> str:
        return f'RngStream(seed={self.seed}, stream={self.stream}, path={self.path})'

    def __getattr__(self, name: str):
        # Draw methods (normal, uniform, random, ...) come from the generator
        if name.startswith('_'):
            raise AttributeError(name)

        return getattr(self.generator, name)

    @cached_property
    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            self.seed, spawn_key=(self.stream, *self.path)
        )
        return np.random.Generator(np.random.PCG64(sequence))

    def child(self, *key: int) -> 'RngStream':
        return RngStream(self.seed, self.stream, self.path + key)


class EssVariant(str, Enum):
    SUMSQ = 'sumsq'
    MAX = 'max'


def normalize_weights(log_w) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    if log_w.size == 0:
        raise DataError('Cannot normalize an empty weight vector.')

    if np.isnan(log_w).any() or np.isposinf(log_w).any():
        raise DataError('Log-weights must be finite or -inf.')

    if np.all(log_w == -np.inf):
        raise AllWeightsZero(log_w.size)

    return np.exp(log_w - logsumexp(log_w))


def ess_inverse_sum_squares(weights) -> float:
    weights = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(weights**2))


def ess_inverse_max(weights) -> float:
    return float(1.0 / np.max(weights))


def ess(weights, variant: EssVariant = EssVariant.SUMSQ) -> float:
    if EssVariant(variant) is EssVariant.MAX:
        return ess_inverse_max(weights)

    return ess_inverse_sum_squares(weights)


def draw_categorical(weights, size: int, rng: RngStream) -> np.ndarray:
    """Independent categorical draws by inversion of the cumulative weights.

    Zero-weight categories are never drawn.
    """
    cumulative = np.cumsum(weights)
    targets = rng.random(size) * cumulative[-1]
    picks = np.searchsorted(cumulative, targets, side='right')
    return np.minimum(picks, len(cumulative) - 1)


class WeightedCloud:
    def __init__(self, samples, log_weights=None):
        samples = np.array(samples, dtype=float)
        if samples.ndim == 1:
            samples = samples.reshape(-1, 1)

        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            raise DataError('Samples must form a non-empty (N, d) array.')

        if log_weights is None:
            log_weights = np.zeros(samples.shape[0])
        else:
            log_weights = np.array(log_weights, dtype=float).reshape(-1)

        if log_weights.shape[0] != samples.shape[0]:
            raise DimensionMismatch(samples.shape[0], log_weights.shape[0])

        if np.isnan(log_weights).any() or np.isposinf(log_weights).any():
            raise DataError('Log-weights must be finite or -inf.')

        samples.setflags(write=False)
        log_weights.setflags(write=False)
        self.samples = samples
        self.log_weights = log_weights

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @cached_property
    def normalized(self) -> np.ndarray:
        weights = normalize_weights(self.log_weights)
        weights.setflags(write=False)
        return weights

    @classmethod
    def from_weights(cls, samples, weights) -> 'WeightedCloud':
        with np.errstate(divide='ignore'):
            return cls(samples, np.log(np.asarray(weights, dtype=float)))


@dataclass(frozen=True)
class EvidenceEstimate:
    log_z: float
    terms: Optional[np.ndarray] = None

    @property
    def z_hat(self) -> float:
        return float(np.exp(self.log_z))


def is_estimate(cloud: WeightedCloud, h: Callable = identity):
    values = np.asarray(h(cloud.samples), dtype=float)
    result = cloud.normalized @ values
    return float(result) if np.ndim(result) == 0 else result


def evidence_estimate(cloud: WeightedCloud) -> EvidenceEstimate:
    if np.all(cloud.log_weights == -np.inf):
        return EvidenceEstimate(log_z=-np.inf)

    return EvidenceEstimate(
        log_z=float(logsumexp(cloud.log_weights) - np.log(len(cloud)))
    )
