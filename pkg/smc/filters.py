"""Bootstrap particle filter and its compressed variants.

Every step draws from three children of the run's stream (propagation,
compression, resampling), so filters sharing a seed share their propagation
and resampling randomness whatever the compression consumes.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from scipy.special import logsumexp
from smc.cmc import SelectionMode, SummaryCloud, compress
from smc.core import (
    EssVariant,
    RngStream,
    WeightedCloud,
    ess,
    normalize_weights,
)
from smc.partition import PartitionKind
from smc.resample import ResamplePlan, resample, resample_indices
from typing import Optional, Union
from utils.errors import (
    AllWeightsZero,
    ConfigError,
    DivisibilityViolation,
    ModelDimensionMismatch,
    ProvenanceMismatch,
)

import logging
import numpy as np
import time


logger = logging.getLogger('cmcpf')

DATA, FILTER = 0, 1
PROPAGATE, COMPRESS, RESAMPLE = 0, 1, 2


class EvaluationCounter:
    def __init__(self):
        self.count = 0

    def add(self, n: int) -> None:
        self.count += int(n)


class StateSpaceModel(ABC):
    """Vectorized state-space model: states travel as ``(n, dim)`` arrays."""

    dim: int = 1

    @abstractmethod
    def sample_initial(self, n: int, rng: RngStream) -> np.ndarray:
        ...

    @abstractmethod
    def sample_transition(
        self, states: np.ndarray, t: int, rng: RngStream
    ) -> np.ndarray:
        ...

    @abstractmethod
    def log_likelihood(self, states: np.ndarray, y: np.ndarray, t: int) -> np.ndarray:
        ...

    @abstractmethod
    def sample_observation(self, state: np.ndarray, t: int, rng: RngStream) -> np.ndarray:
        ...

    def sample_truth_transition(
        self, states: np.ndarray, t: int, rng: RngStream
    ) -> np.ndarray:
        return self.sample_transition(states, t, rng)

    def evaluate(
        self, states: np.ndarray, y: np.ndarray, t: int, counter: EvaluationCounter
    ) -> np.ndarray:
        states = np.asarray(states, dtype=float)
        if states.ndim != 2 or states.shape[1] != self.dim:
            raise ModelDimensionMismatch(
                self.dim, states.shape[-1] if states.ndim else 0
            )

        counter.add(states.shape[0])
        return self.log_likelihood(states, y, t)


class Algorithm(str, Enum):
    BPF = 'bpf'
    CBPF = 'cbpf'
    GENERIC_CPF = 'cpf'


@dataclass(frozen=True)
class AdaptiveM:
    enabled: bool = False
    gamma: float = 1.0
    m_min: int = 1


@dataclass(frozen=True)
class FilterConfig:
    algorithm: Algorithm = Algorithm.BPF
    n: int = 1000
    m: Optional[int] = None
    eta: float = 0.5
    ess: EssVariant = EssVariant.SUMSQ
    partition: PartitionKind = PartitionKind.UNIFORM_GRID
    selection: SelectionMode = SelectionMode.WEIGHTED_MEAN
    resample: ResamplePlan = ResamplePlan()
    adaptive: AdaptiveM = AdaptiveM()
    seed: int = 0
    stream: int = 0

    def __post_init__(self):
        for name, kind in (
            ('algorithm', Algorithm),
            ('ess', EssVariant),
            ('partition', PartitionKind),
            ('selection', SelectionMode),
        ):
            object.__setattr__(self, name, kind(getattr(self, name)))

        if self.m is None:
            object.__setattr__(self, 'm', self.n)

        if self.n < 1 or not 1 <= self.m <= self.n:
            raise ConfigError(f'Need N >= 1 and 1 <= M <= N, got N = {self.n}, M = {self.m}.')

        if not 0 <= self.eta <= 1:
            raise ConfigError(f'Resampling threshold must lie in [0, 1], got {self.eta}.')

        if self.selection is SelectionMode.FUNCTION_SPECIFIC:
            raise ProvenanceMismatch(self.selection.value)

        if self.algorithm is Algorithm.GENERIC_CPF and self.n % self.m:
            raise DivisibilityViolation(self.n, self.m)

        if self.adaptive.enabled:
            if self.algorithm is not Algorithm.CBPF:
                raise ConfigError('Adaptive M is only available with CBPF.')
            if self.adaptive.gamma <= 0 or self.adaptive.m_min < 1:
                raise ConfigError('Adaptive M needs gamma > 0 and M_min >= 1.')


@dataclass
class FilterTrace:
    config: FilterConfig
    estimates: np.ndarray
    ess: np.ndarray
    resampled: np.ndarray
    log_evidence: np.ndarray  # Running log Z_t
    evaluations: np.ndarray
    m_used: np.ndarray
    wiped: np.ndarray
    wall_time: float = 0.0
    counter: EvaluationCounter = field(default_factory=EvaluationCounter)

    @property
    def log_z(self) -> float:
        return float(self.log_evidence[-1]) if len(self.log_evidence) else 0.0

    @property
    def total_evaluations(self) -> int:
        return int(self.evaluations.sum())

    def rmse(self, states: np.ndarray) -> float:
        truth = np.asarray(states, dtype=float).reshape(-1, self.estimates.shape[1])
        if len(truth) == len(self.estimates) + 1:  # Drop x_0
            truth = truth[1:]

        return float(np.sqrt(np.mean((self.estimates - truth) ** 2)))


class _Recorder:
    def __init__(self, cfg: FilterConfig, steps: int, dim: int):
        self.cfg = cfg
        self.estimates = np.zeros((steps, dim))
        self.ess = np.zeros(steps)
        self.resampled = np.zeros(steps, dtype=bool)
        self.log_evidence = np.zeros(steps)
        self.evaluations = np.zeros(steps, dtype=int)
        self.m_used = np.zeros(steps, dtype=int)
        self.wiped = np.zeros(steps, dtype=bool)

    def trace(self, counter: EvaluationCounter, started: float) -> FilterTrace:
        return FilterTrace(
            config=self.cfg,
            estimates=self.estimates,
            ess=self.ess,
            resampled=self.resampled,
            log_evidence=self.log_evidence,
            evaluations=self.evaluations,
            m_used=self.m_used,
            wiped=self.wiped,
            wall_time=time.perf_counter() - started,
            counter=counter,
        )


def adaptive_m(ess_value: float, gamma: float, m_min: int, n: Optional[int] = None) -> int:
    m = max(int(np.floor(gamma * np.floor(ess_value))), int(m_min))
    return min(m, n) if n is not None else m


def posterior_mean(source: Union[WeightedCloud, SummaryCloud]) -> np.ndarray:
    if isinstance(source, WeightedCloud):
        return source.normalized @ source.samples

    if source.provenance is SelectionMode.FUNCTION_SPECIFIC:
        raise ProvenanceMismatch(source.provenance.value)

    if not np.any(source.weights > 0):
        raise AllWeightsZero(len(source))

    return (source.weights / source.weights.sum()) @ source.particles


def _observations(observations) -> np.ndarray:
    observations = np.asarray(observations, dtype=float)
    return observations.reshape(len(observations), -1)


def _normalize_or_reset(log_w: np.ndarray, t: int) -> tuple:
    try:
        return normalize_weights(log_w), False
    except AllWeightsZero:
        logger.warning(f'Every particle violated the model at t = {t}, weights reset.')
        return np.full(len(log_w), 1.0 / len(log_w)), True


def _streams(cfg: FilterConfig) -> RngStream:
    return RngStream(cfg.seed, cfg.stream).child(FILTER)


def run_bpf(
    model: StateSpaceModel,
    observations,
    cfg: FilterConfig,
    counter: Optional[EvaluationCounter] = None,
) -> FilterTrace:
    observations = _observations(observations)
    counter = counter or EvaluationCounter()
    started = time.perf_counter()
    rng = _streams(cfg)
    n = cfg.n
    record = _Recorder(cfg, len(observations), model.dim)

    particles = model.sample_initial(n, rng.child(0, PROPAGATE))
    log_w = np.zeros(n)  # w_0 = 1
    log_z = 0.0
    for t in range(1, len(observations) + 1):
        step = t - 1
        particles = model.sample_transition(particles, t, rng.child(t, PROPAGATE))
        log_lik = model.evaluate(particles, observations[step], t, counter)

        before = logsumexp(log_w)
        log_w = log_w + log_lik
        weights, wiped = _normalize_or_reset(log_w, t)
        if wiped:
            log_z = -np.inf
            log_w = np.zeros(n)
        else:
            log_z += logsumexp(log_w) - before

        record.estimates[step] = weights @ particles
        record.ess[step] = ess(weights, cfg.ess)
        record.log_evidence[step] = log_z
        record.evaluations[step] = n
        record.m_used[step] = n
        record.wiped[step] = wiped

        if record.ess[step] <= cfg.eta * n:
            picks = resample_indices(
                weights, n, rng.child(t, RESAMPLE), cfg.resample.scheme
            )
            particles = particles[picks]
            # Flat weights carry the running evidence Z_t
            log_w = np.full(n, log_z if np.isfinite(log_z) else 0.0)
            record.resampled[step] = True

    return record.trace(counter, started)


def _weigh_summaries(
    model: StateSpaceModel,
    sc: SummaryCloud,
    y: np.ndarray,
    t: int,
    counter: EvaluationCounter,
) -> tuple:
    log_lik = model.evaluate(sc.particles, y, t, counter)
    with np.errstate(divide='ignore'):
        log_w = np.log(sc.weights) + log_lik

    weights, wiped = _normalize_or_reset(log_w, t)
    increment = -np.inf if wiped else float(logsumexp(log_w))
    return log_w, weights, increment, wiped


def _expanded_ess(weights: np.ndarray, counts: np.ndarray, variant: EssVariant) -> float:
    # ESS of the N-particle cloud the summaries stand for: w_m spread over |J_m| members
    if EssVariant(variant) is EssVariant.MAX:
        return float(1.0 / np.max(weights / counts))

    return float(1.0 / np.sum(weights**2 / counts))


def run_cbpf(
    model: StateSpaceModel,
    observations,
    cfg: FilterConfig,
    counter: Optional[EvaluationCounter] = None,
) -> FilterTrace:
    observations = _observations(observations)
    counter = counter or EvaluationCounter()
    started = time.perf_counter()
    rng = _streams(cfg)
    n = cfg.n
    eps = cfg.resample.eps if cfg.resample.regularized else None
    record = _Recorder(cfg, len(observations), model.dim)

    particles = model.sample_initial(n, rng.child(0, PROPAGATE))
    log_z = 0.0
    previous_ess = float(n)
    for t in range(1, len(observations) + 1):
        step = t - 1
        particles = model.sample_transition(particles, t, rng.child(t, PROPAGATE))

        m = cfg.m
        if cfg.adaptive.enabled:
            m = adaptive_m(previous_ess, cfg.adaptive.gamma, cfg.adaptive.m_min, n)

        sc = compress(
            WeightedCloud(particles),
            m,
            cfg.partition,
            cfg.selection,
            rng.child(t, COMPRESS),
            eps=eps,
        )
        _, weights, increment, wiped = _weigh_summaries(
            model, sc, observations[step], t, counter
        )
        log_z += increment

        record.estimates[step] = weights @ sc.particles
        record.ess[step] = ess(weights, cfg.ess)
        record.log_evidence[step] = log_z
        record.evaluations[step] = len(sc)
        record.m_used[step] = len(sc)
        record.wiped[step] = wiped
        record.resampled[step] = True
        previous_ess = _expanded_ess(weights, sc.counts, cfg.ess)

        particles = resample(
            sc.reweighted(weights), n, rng.child(t, RESAMPLE), cfg.resample
        )
        logger.debug(f'CBPF t = {t}: M = {len(sc)}, ESS = {record.ess[step]:.1f}')

    return record.trace(counter, started)


def _expansion(n: int, kept: int) -> tuple:
    # Copies per summary particle; each is K = N / M when no region was dropped
    copies = np.full(kept, n // kept)
    copies[: n % kept] += 1
    return copies, np.log((n / kept) / copies)


def run_generic_cpf(
    model: StateSpaceModel,
    observations,
    cfg: FilterConfig,
    counter: Optional[EvaluationCounter] = None,
) -> FilterTrace:
    if cfg.n % cfg.m:
        raise DivisibilityViolation(cfg.n, cfg.m)

    observations = _observations(observations)
    counter = counter or EvaluationCounter()
    started = time.perf_counter()
    rng = _streams(cfg)
    n = cfg.n
    eps = cfg.resample.eps if cfg.resample.regularized else None
    record = _Recorder(cfg, len(observations), model.dim)

    particles = model.sample_initial(n, rng.child(0, PROPAGATE))
    log_rho = np.full(n, -np.log(n))
    log_z = 0.0
    for t in range(1, len(observations) + 1):
        step = t - 1
        particles = model.sample_transition(particles, t, rng.child(t, PROPAGATE))
        sc = compress(
            WeightedCloud(particles, log_rho),
            cfg.m,
            cfg.partition,
            cfg.selection,
            rng.child(t, COMPRESS),
            eps=eps,
        )
        log_w, weights, increment, wiped = _weigh_summaries(
            model, sc, observations[step], t, counter
        )
        log_z += increment
        kept = len(sc)

        record.estimates[step] = weights @ sc.particles
        record.ess[step] = ess(weights, cfg.ess)
        record.log_evidence[step] = log_z
        record.evaluations[step] = kept
        record.m_used[step] = kept
        record.wiped[step] = wiped

        if wiped or record.ess[step] <= cfg.eta * kept:
            particles = resample(
                sc.reweighted(weights), n, rng.child(t, RESAMPLE), cfg.resample
            )
            log_rho = np.full(n, 0.0 if wiped else increment)  # rho = sum_m w_m
            record.resampled[step] = True
        else:
            copies, scale = _expansion(n, kept)
            particles = np.repeat(sc.particles, copies, axis=0)
            log_rho = np.repeat(log_w + scale, copies)

    return record.trace(counter, started)


def run_filter(
    model: StateSpaceModel,
    observations,
    cfg: FilterConfig,
    counter: Optional[EvaluationCounter] = None,
) -> FilterTrace:
    if cfg.algorithm is Algorithm.CBPF:
        return run_cbpf(model, observations, cfg, counter)
    elif cfg.algorithm is Algorithm.GENERIC_CPF:
        return run_generic_cpf(model, observations, cfg, counter)

    return run_bpf(model, observations, cfg, counter)
