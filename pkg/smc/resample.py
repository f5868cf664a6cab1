from dataclasses import dataclass
from enum import Enum
from scipy.linalg import LinAlgError, cholesky
from smc.cmc import SelectionMode, SummaryCloud
from smc.core import RngStream, draw_categorical
from utils.errors import ArgumentError, CovarianceNotSPD, ProvenanceMismatch

import numpy as np


class ResampleMode(str, Enum):
    MULTINOMIAL = 'multinomial'
    REGULARIZED = 'regularized'


class ResampleScheme(str, Enum):
    MULTINOMIAL = 'multinomial'
    SYSTEMATIC = 'systematic'


@dataclass(frozen=True)
class ResamplePlan:
    mode: ResampleMode = ResampleMode.MULTINOMIAL
    eps: float = 1e-6
    scheme: ResampleScheme = ResampleScheme.MULTINOMIAL

    def __post_init__(self):
        object.__setattr__(self, 'mode', ResampleMode(self.mode))
        object.__setattr__(self, 'scheme', ResampleScheme(self.scheme))
        if self.mode is ResampleMode.REGULARIZED and not self.eps > 0:
            raise ArgumentError('Regularized resampling needs eps > 0.')

    @property
    def regularized(self) -> bool:
        return self.mode is ResampleMode.REGULARIZED


def resample_indices(
    weights: np.ndarray,
    n: int,
    rng: RngStream,
    scheme: ResampleScheme = ResampleScheme.MULTINOMIAL,
) -> np.ndarray:
    if ResampleScheme(scheme) is ResampleScheme.MULTINOMIAL:
        return draw_categorical(weights, n, rng)

    cumulative = np.cumsum(weights)
    positions = (rng.random() + np.arange(n)) / n * cumulative[-1]
    picks = np.searchsorted(cumulative, positions, side='right')
    return np.minimum(picks, len(cumulative) - 1)


def _spatial(sc: SummaryCloud) -> None:
    if sc.provenance is SelectionMode.FUNCTION_SPECIFIC:
        raise ProvenanceMismatch(sc.provenance.value)


def resample_multinomial(
    sc: SummaryCloud,
    n: int,
    rng: RngStream,
    scheme: ResampleScheme = ResampleScheme.MULTINOMIAL,
) -> np.ndarray:
    _spatial(sc)
    return sc.particles[resample_indices(sc.weights, n, rng, scheme)]


def resample_regularized(sc: SummaryCloud, n: int, rng: RngStream) -> np.ndarray:
    _spatial(sc)
    if sc.covariances is None:
        raise ArgumentError('Regularized resampling needs region covariances.')

    factors = np.empty_like(sc.covariances)
    for m, covariance in enumerate(sc.covariances):
        try:
            factors[m] = cholesky(covariance, lower=True)
        except LinAlgError:
            raise CovarianceNotSPD(m)

    picks = draw_categorical(sc.weights, n, rng)
    noise = rng.standard_normal((n, sc.dim))
    return sc.particles[picks] + np.einsum('nij,nj->ni', factors[picks], noise)


def resample(
    sc: SummaryCloud, n: int, rng: RngStream, plan: ResamplePlan = ResamplePlan()
) -> np.ndarray:
    if plan.regularized:
        return resample_regularized(sc, n, rng)

    return resample_multinomial(sc, n, rng, plan.scheme)
