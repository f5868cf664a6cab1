from models.expensive import SyntheticExpensiveModel
from models.kepler import KeplerModel
from models.linear import LinearGaussianModel
from models.toys import AbsLogModel, GrowthModel
from smc.core import RngStream
from smc.filters import StateSpaceModel
from utils.errors import UnknownTarget

import numpy as np


MODELS = {
    'abslog': AbsLogModel,
    'growth': GrowthModel,
    'linear': LinearGaussianModel,
    'kepler': KeplerModel,
}


def get_model(name: str, cost: int = 0, delay: float = 0.0, **kwargs) -> StateSpaceModel:
    try:
        model = MODELS[name](**kwargs)
    except KeyError:
        raise UnknownTarget(name)

    if cost or delay:
        model = SyntheticExpensiveModel(model, cost=cost, delay=delay)

    return model


def generate_synthetic(
    model: StateSpaceModel, horizon: int, rng: RngStream, initial=None
) -> tuple:
    """Forward-simulate ``x_{0:T}`` and ``y_{1:T}``.

    The initial state is ``initial``, else the model's ground truth when it has
    one, else a prior draw. Step ``t`` draws its transition from
    ``rng.child(t, 0)`` and its observation from ``rng.child(t, 1)``.
    """
    if initial is None:
        initial = getattr(model, 'ground_truth', None)
    if initial is None:
        initial = model.sample_initial(1, rng.child(0))[0]

    states = np.zeros((horizon + 1, model.dim))
    states[0] = initial
    observations = []
    for t in range(1, horizon + 1):
        states[t] = model.sample_truth_transition(
            states[t - 1 : t], t, rng.child(t, 0)
        )[0]
        observations.append(model.sample_observation(states[t], t, rng.child(t, 1)))

    width = len(observations[0]) if observations else getattr(model, 'observations', 1)
    return states, np.asarray(observations, dtype=float).reshape(horizon, width)
