from scipy.linalg import cholesky
from scipy.stats import multivariate_normal
from smc.core import RngStream
from smc.filters import StateSpaceModel

import numpy as np


def _matrix(value) -> np.ndarray:
    return np.atleast_2d(np.asarray(value, dtype=float))


class LinearGaussianModel(StateSpaceModel):
    """x_t = A x_{t-1} + N(0, Q), y_t = H x_t + N(0, R), x_0 ~ N(m0, P0)."""

    def __init__(self, a=0.9, q=1.0, h=1.0, r=1.0, m0=0.0, p0=1.0):
        self.a = _matrix(a)
        self.q = _matrix(q)
        self.h = _matrix(h)
        self.r = _matrix(r)
        self.m0 = np.atleast_1d(np.asarray(m0, dtype=float))
        self.p0 = _matrix(p0)
        self.dim = self.a.shape[0]

        self._q_factor = cholesky(self.q, lower=True)
        self._r_factor = cholesky(self.r, lower=True)
        self._p0_factor = cholesky(self.p0, lower=True)
        self._noise = multivariate_normal(mean=np.zeros(len(self.r)), cov=self.r)

    def sample_initial(self, n: int, rng: RngStream) -> np.ndarray:
        return self.m0 + rng.standard_normal((n, self.dim)) @ self._p0_factor.T

    def sample_transition(self, states, t, rng):
        noise = rng.standard_normal(states.shape) @ self._q_factor.T
        return states @ self.a.T + noise

    def log_likelihood(self, states, y, t):
        residual = np.asarray(y, dtype=float).reshape(1, -1) - states @ self.h.T
        return np.atleast_1d(self._noise.logpdf(residual))

    def sample_observation(self, state, t, rng):
        state = np.asarray(state, dtype=float).reshape(-1)
        return self.h @ state + self._r_factor @ rng.standard_normal(len(self.r))


def kalman_log_evidence(model: LinearGaussianModel, observations) -> tuple:
    """Exact log p(y_{1:T}) and filtered means by the Kalman recursion."""
    observations = np.asarray(observations, dtype=float).reshape(len(observations), -1)
    a, q, h, r = model.a, model.q, model.h, model.r

    mean, cov = model.m0.copy(), model.p0.copy()
    log_z = 0.0
    means = np.zeros((len(observations), model.dim))
    for step, y in enumerate(observations):
        mean = a @ mean
        cov = np.linalg.multi_dot([a, cov, a.T]) + q

        innovation_cov = np.linalg.multi_dot([h, cov, h.T]) + r
        log_z += multivariate_normal.logpdf(y, mean=h @ mean, cov=innovation_cov)

        gain = cov @ h.T @ np.linalg.inv(innovation_cov)
        mean = mean + gain @ (y - h @ mean)
        cov = cov - gain @ h @ cov
        means[step] = mean

    return float(log_z), means
