from dataclasses import dataclass
from scipy.special import gammaln
from scipy.stats import norm
from smc.core import RngStream
from utils.errors import MomentOrderError, UnknownTarget

import numpy as np


def _check_order(k: int) -> int:
    if int(k) != k or not 1 <= k <= 5:
        raise MomentOrderError(k)

    return int(k)


@dataclass(frozen=True)
class GammaTarget:
    alpha: float = 4.0
    kappa: float = 0.5  # Scale

    name = 'gamma'

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        return rng.gamma(self.alpha, self.kappa, size=n)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            value = (
                (self.alpha - 1) * np.log(x)
                - x / self.kappa
                - gammaln(self.alpha)
                - self.alpha * np.log(self.kappa)
            )
        return np.where(x > 0, value, -np.inf)

    def moment(self, k: int) -> float:
        k = _check_order(k)
        return float(
            np.exp(k * np.log(self.kappa) + gammaln(self.alpha + k) - gammaln(self.alpha))
        )


@dataclass(frozen=True)
class MixtureTarget:
    weights: tuple = (0.5, 0.5)
    means: tuple = (-2.0, 4.0)
    variances: tuple = (1.0, 0.25)

    name = 'mixture'

    def sample(self, n: int, rng: RngStream) -> np.ndarray:
        components = np.searchsorted(np.cumsum(self.weights), rng.random(n), side='right')
        components = np.minimum(components, len(self.weights) - 1)
        means = np.asarray(self.means)[components]
        scales = np.sqrt(np.asarray(self.variances))[components]
        return means + scales * rng.standard_normal(n)

    def log_density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)[..., None]
        terms = np.log(self.weights) + norm.logpdf(
            x, loc=self.means, scale=np.sqrt(self.variances)
        )
        return np.logaddexp.reduce(terms, axis=-1)

    def moment(self, k: int) -> float:
        k = _check_order(k)
        return float(
            sum(
                w * norm(loc=mu, scale=np.sqrt(var)).moment(k)
                for w, mu, var in zip(self.weights, self.means, self.variances)
            )
        )


TARGETS = {'gamma': GammaTarget, 'mixture': MixtureTarget}


def get_target(name: str):
    try:
        return TARGETS[name]()
    except KeyError:
        raise UnknownTarget(name)


def gamma_moments(k: int) -> float:
    return GammaTarget().moment(k)


def mixture_moments(k: int) -> float:
    return MixtureTarget().moment(k)
