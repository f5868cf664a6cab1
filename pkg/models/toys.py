from scipy.stats import norm
from smc.core import RngStream
from smc.filters import StateSpaceModel

import numpy as np


class AbsLogModel(StateSpaceModel):
    """x_t = |x_{t-1}| + v_t, y_t = log(x_t^2) + u_t with unit Gaussian noises."""

    dim = 1
    horizon = 100

    def __init__(self, transition_var: float = 1.0, obs_var: float = 1.0):
        self.transition_std = np.sqrt(transition_var)
        self.obs_std = np.sqrt(obs_var)

    def sample_initial(self, n: int, rng: RngStream) -> np.ndarray:
        return rng.standard_normal((n, 1))

    def sample_transition(self, states, t, rng):
        return np.abs(states) + self.transition_std * rng.standard_normal(states.shape)

    def _mean(self, states: np.ndarray) -> np.ndarray:
        # |x| >= 1e-12 keeps log(x^2) finite at the origin
        return np.log(np.maximum(states[:, 0] ** 2, 1e-24))

    def log_likelihood(self, states, y, t):
        residual = np.asarray(y, dtype=float).reshape(1, -1) - self._mean(states)[:, None]
        return norm.logpdf(residual, scale=self.obs_std).sum(axis=1)

    def sample_observation(self, state, t, rng):
        state = np.asarray(state, dtype=float).reshape(1, -1)
        return self._mean(state) + self.obs_std * rng.standard_normal(1)


class GrowthModel(StateSpaceModel):
    """Univariate nonstationary growth benchmark.

    x_t = x/2 + 25x/(1 + x^2) + forcing*cos(1.2t) + v_t, y_t = x_t^2/20 + u_t.
    """

    dim = 1
    horizon = 100

    def __init__(
        self,
        forcing: float = 8.0,
        transition_var: float = 10.0,
        obs_var: float = 1.0,
        initial_var: float = 5.0,
    ):
        self.forcing = forcing
        self.transition_std = np.sqrt(transition_var)
        self.obs_std = np.sqrt(obs_var)
        self.initial_std = np.sqrt(initial_var)

    def drift(self, x: np.ndarray, t: int) -> np.ndarray:
        return 0.5 * x + 25 * x / (1 + x**2) + self.forcing * np.cos(1.2 * t)

    def sample_initial(self, n, rng):
        return self.initial_std * rng.standard_normal((n, 1))

    def sample_transition(self, states, t, rng):
        return self.drift(states, t) + self.transition_std * rng.standard_normal(
            states.shape
        )

    def log_likelihood(self, states, y, t):
        residual = np.asarray(y, dtype=float).reshape(1, -1) - states[:, :1] ** 2 / 20
        return norm.logpdf(residual, scale=self.obs_std).sum(axis=1)

    def sample_observation(self, state, t, rng):
        state = np.asarray(state, dtype=float).reshape(-1)
        return state[:1] ** 2 / 20 + self.obs_std * rng.standard_normal(1)
