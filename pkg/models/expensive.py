from smc.core import RngStream
from smc.filters import StateSpaceModel

import numpy as np
import time


class SyntheticExpensiveModel(StateSpaceModel):
    """Wraps a model and adds a per-evaluation cost to its likelihood.

    ``cost`` burns that many vectorized iterations over one scratch value per
    evaluated state; ``delay`` sleeps that many seconds per evaluated state.
    Likelihood values are the inner model's, unchanged.
    """

    def __init__(self, inner: StateSpaceModel, cost: int = 0, delay: float = 0.0):
        if cost < 0 or delay < 0:
            raise ValueError('Evaluation cost and delay must be nonnegative.')

        self.inner = inner
        self.cost = int(cost)
        self.delay = float(delay)
        self.dim = inner.dim

    def __getattr__(self, name: str):
        if name == 'inner':
            raise AttributeError(name)

        return getattr(self.inner, name)

    def sample_initial(self, n: int, rng: RngStream) -> np.ndarray:
        return self.inner.sample_initial(n, rng)

    def sample_transition(self, states, t, rng):
        return self.inner.sample_transition(states, t, rng)

    def sample_truth_transition(self, states, t, rng):
        return self.inner.sample_truth_transition(states, t, rng)

    def sample_observation(self, state, t, rng):
        return self.inner.sample_observation(state, t, rng)

    def _burn(self, n: int) -> None:
        scratch = np.full(n, 0.5)
        for _ in range(self.cost):
            scratch = np.cos(scratch)

        if self.delay:
            time.sleep(self.delay * n)

    def log_likelihood(self, states, y, t):
        values = self.inner.log_likelihood(states, y, t)
        self._burn(len(states))
        return values
