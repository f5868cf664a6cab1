"""Radial velocity of a star with S independent Keplerian companions.

State layout: ``[V0, K_1, omega_1, e_1, P_1, tau_1, ..., K_S, ..., tau_S]``,
dimension ``1 + 5S``. The parameters other than the periastron longitudes are
static; the filters track them through an artificial random walk, and the
likelihood is zero outside the constraint box.

The true anomaly follows from the mean anomaly through Kepler's equation and
the half-angle relation, so its rate equation is never integrated.
"""

from scipy.stats import norm
from smc.core import RngStream
from smc.filters import StateSpaceModel
from typing import Optional
from utils.errors import (
    ConstraintViolation,
    EccentricityOutOfRange,
    NonpositivePeriod,
)

import logging
import numpy as np


logger = logging.getLogger('cmcpf')

TWO_PI = 2 * np.pi
ECCENTRICITY_CLAMP = 1 - 1e-9

V0_BOX = (-20.0, 20.0)
K_BOX = (0.0, 50.0)
OMEGA_BOX = (0.0, TWO_PI)
E_BOX = (0.0, 1.0)
P_BOX = (0.0, 365.0)

# Ground truth: V0, then (K, omega_0, e, P, tau) per object
GROUND_TRUTH = (2.0, 25.0, 0.61, 0.1, 15.0, 3.0, 5.0, 0.17, 0.3, 115.0, 25.0)
SCENARIOS = {'E1': 0, 'E2': 1, 'E3': 2}


def kepler_mean_anomaly(t, period, tau):
    period = np.asarray(period, dtype=float)
    if np.any(period <= 0):
        raise NonpositivePeriod(f'Orbital period must be positive, got {period}.')

    return TWO_PI / period * (np.asarray(t, dtype=float) - tau)


def _kepler_residual(E, M, e):
    return E - e * np.sin(E) - M


def kepler_solve(
    M,
    e,
    tol: float = 1e-12,
    max_iter: int = 100,
    full_output: bool = False,
):
    """Solve M = E - e sin E for the eccentric anomaly E.

    Newton-Raphson from E0 = M with steps clipped to |dE| <= 1; entries that
    have not converged after ``max_iter`` steps are finished by bisection on
    [0, 2pi]. Eccentricities in [1 - 1e-9, 1] are clamped to 1 - 1e-9.
    With ``full_output`` a dict with ``iterations``, ``clamped`` and
    ``bisected`` counts is returned as well.
    """
    M = np.mod(np.asarray(M, dtype=float), TWO_PI)
    e = np.asarray(e, dtype=float)
    if np.any((e < 0) | (e > 1)):
        raise EccentricityOutOfRange(float(e[(e < 0) | (e > 1)].flat[0]))

    clamped = e > ECCENTRICITY_CLAMP
    if np.any(clamped):
        logger.debug(f'Clamped {int(clamped.sum())} eccentricities near 1.')
        e = np.where(clamped, ECCENTRICITY_CLAMP, e)

    M, e = np.broadcast_arrays(M, e)
    E = M.copy()
    iterations = 0
    for iterations in range(1, max_iter + 1):
        residual = _kepler_residual(E, M, e)
        if np.all(np.abs(residual) <= tol):
            break

        step = np.clip(residual / (1 - e * np.cos(E)), -1.0, 1.0)
        E = E - step

    stalled = np.abs(_kepler_residual(E, M, e)) > tol
    if np.any(stalled):
        lo = np.zeros(int(stalled.sum()))
        hi = np.full(lo.shape, TWO_PI)
        target, ecc = M[stalled], e[stalled]
        for _ in range(200):  # Halves 2pi well below float resolution
            mid = 0.5 * (lo + hi)
            below = _kepler_residual(mid, target, ecc) < 0
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)

        E = E.copy()
        E[stalled] = 0.5 * (lo + hi)

    if not full_output:
        return E

    return E, {
        'iterations': iterations,
        'clamped': int(np.sum(clamped)),
        'bisected': int(np.sum(stalled)),
    }


def true_anomaly(E, e):
    E = np.asarray(E, dtype=float)
    e = np.minimum(np.asarray(e, dtype=float), ECCENTRICITY_CLAMP)
    u = 2 * np.arctan2(np.sqrt(1 + e) * np.sin(E / 2), np.sqrt(1 - e) * np.cos(E / 2))
    return np.mod(u, TWO_PI)


def within_box(states: np.ndarray) -> np.ndarray:
    states = np.atleast_2d(states)
    v0 = states[:, 0]
    ok = (V0_BOX[0] <= v0) & (v0 <= V0_BOX[1])
    for i in range((states.shape[1] - 1) // 5):
        K, omega, e, P, tau = states[:, 1 + 5 * i : 6 + 5 * i].T
        ok &= (K_BOX[0] <= K) & (K <= K_BOX[1])
        ok &= (OMEGA_BOX[0] <= omega) & (omega <= OMEGA_BOX[1])
        ok &= (E_BOX[0] <= e) & (e <= E_BOX[1])
        ok &= (P_BOX[0] < P) & (P <= P_BOX[1])
        ok &= (0 <= tau) & (tau <= P)

    return ok


def _rv(states: np.ndarray, t) -> np.ndarray:
    velocity = states[:, 0].copy()
    for i in range((states.shape[1] - 1) // 5):
        K, omega, e, P, tau = states[:, 1 + 5 * i : 6 + 5 * i].T
        E = kepler_solve(kepler_mean_anomaly(t, P, tau), e)
        u = true_anomaly(E, e)
        velocity += K * (np.cos(u + omega) + e * np.cos(omega))

    return velocity


def radial_velocity(states, t):
    states = np.atleast_2d(np.asarray(states, dtype=float))
    if not np.all(within_box(states)):
        raise ConstraintViolation('State outside the constraint box.')

    velocity = _rv(states, t)
    return velocity if len(velocity) > 1 else float(velocity[0])


class KeplerModel(StateSpaceModel):
    def __init__(
        self,
        objects: int = 0,
        observations: int = 5,
        noise_var: float = 1.0,
        omega_var: float = 0.5,
        drift_var: float = 0.1,
    ):
        if objects < 0:
            raise ValueError('Object count must be nonnegative.')

        self.objects = objects
        self.observations = observations
        self.noise_std = np.sqrt(noise_var)
        self.dim = 1 + 5 * objects

        std = np.full(self.dim, np.sqrt(drift_var))
        std[2::5] = np.sqrt(omega_var)
        self.transition_std = std

    @property
    def ground_truth(self) -> np.ndarray:
        return np.asarray(GROUND_TRUTH[: self.dim])

    def sample_initial(self, n: int, rng: RngStream) -> np.ndarray:
        states = np.empty((n, self.dim))
        states[:, 0] = rng.uniform(*V0_BOX, size=n)
        for i in range(self.objects):
            base = 1 + 5 * i
            states[:, base] = rng.uniform(*K_BOX, size=n)
            states[:, base + 1] = rng.uniform(*OMEGA_BOX, size=n)
            states[:, base + 2] = rng.uniform(*E_BOX, size=n)
            states[:, base + 3] = rng.uniform(*P_BOX, size=n)
            states[:, base + 4] = rng.uniform(size=n) * states[:, base + 3]

        return states

    def sample_transition(self, states, t, rng):
        # No reflection: leaving the box is handled by the likelihood indicator
        return states + self.transition_std * rng.standard_normal(states.shape)

    def sample_truth_transition(self, states, t, rng):
        # Static parameters stay put; longitudes precess as a wrapped random walk
        states = np.array(states, dtype=float)
        omegas = slice(2, None, 5)
        steps = self.transition_std[omegas] * rng.standard_normal(
            states[:, omegas].shape
        )
        states[:, omegas] = np.mod(states[:, omegas] + steps, TWO_PI)
        return states

    def log_likelihood(self, states, y, t):
        y = np.asarray(y, dtype=float).reshape(1, -1)
        values = np.full(len(states), -np.inf)
        ok = within_box(states)
        if np.any(ok):
            velocity = _rv(states[ok], t)
            values[ok] = norm.logpdf(
                y - velocity[:, None], scale=self.noise_std
            ).sum(axis=1)

        return values

    def sample_observation(self, state, t, rng):
        state = np.atleast_2d(np.asarray(state, dtype=float))
        return _rv(state, t)[0] + self.noise_std * rng.standard_normal(self.observations)


def kepler_prior_sample(objects: int, rng: RngStream) -> np.ndarray:
    return KeplerModel(objects).sample_initial(1, rng)[0]


def kepler_transition(state, t, rng: RngStream, model: Optional[KeplerModel] = None) -> np.ndarray:
    state = np.atleast_2d(np.asarray(state, dtype=float))
    model = model or KeplerModel((state.shape[1] - 1) // 5)
    return model.sample_transition(state, t, rng)[0]


def kepler_log_likelihood(state, y, t, model: Optional[KeplerModel] = None) -> float:
    state = np.atleast_2d(np.asarray(state, dtype=float))
    model = model or KeplerModel((state.shape[1] - 1) // 5, observations=len(np.atleast_1d(y)))
    return float(model.log_likelihood(state, y, t)[0])
