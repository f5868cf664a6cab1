from dataclasses import dataclass
from enum import Enum
from scipy.spatial.distance import cdist
from smc.core import RngStream, WeightedCloud, draw_categorical
from typing import Optional
from utils.errors import ArgumentError, DegenerateRangeWarning, DimensionMismatch

import logging
import numpy as np
import warnings


logger = logging.getLogger('cmcpf')


class PartitionKind(str, Enum):
    RANDOM_GRID = 'p1'
    UNIFORM_GRID = 'p2'
    VORONOI = 'p3'


@dataclass(frozen=True)
class Partition:
    kind: PartitionKind
    dim: int
    requested: int
    edges: tuple = ()  # Interior cut points per dimension (grids)
    centroids: Optional[np.ndarray] = None  # (M, d) for Voronoi
    degenerate: bool = False

    @property
    def shape(self) -> tuple:
        return tuple(len(e) + 1 for e in self.edges)

    @property
    def n_cells(self) -> int:
        if self.kind is PartitionKind.VORONOI:
            return len(self.centroids)

        return int(np.prod(self.shape))

    def cells(self, samples: np.ndarray) -> np.ndarray:
        if self.kind is PartitionKind.VORONOI:
            # argmin keeps the lowest centroid index on ties
            return cdist(samples, self.centroids, 'sqeuclidean').argmin(axis=1)

        # Half-open bins [lo, hi); values past the outer edges clamp to the end bins
        bins = tuple(
            np.searchsorted(edges, samples[:, i], side='right')
            for i, edges in enumerate(self.edges)
        )
        return np.ravel_multi_index(bins, self.shape)


@dataclass(frozen=True)
class IndexSets:
    """Non-empty regions, numbered by their lowest member index.

    ``labels[n]`` is the region of sample ``n``; ``cells[m]`` is the
    partition cell behind region ``m``.
    """

    labels: np.ndarray
    cells: np.ndarray

    def __len__(self) -> int:
        return len(self.cells)

    @property
    def counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=len(self))

    @property
    def sets(self) -> list:
        order = np.argsort(self.labels, kind='stable')
        return np.split(order, np.cumsum(self.counts)[:-1])


def _grid_shape(requested: int, active: np.ndarray) -> tuple:
    # Smallest balanced product >= requested over the non-collapsed dimensions
    counts = np.ones(len(active), dtype=int)
    n_active = int(active.sum())
    if n_active == 0:
        return tuple(counts), requested > 1

    base = max(1, int(round(requested ** (1.0 / n_active))))
    while base > 1 and base**n_active > requested:
        base -= 1
    while (base + 1) ** n_active <= requested:
        base += 1

    counts[active] = base
    while np.prod(counts) < requested:
        candidates = np.where(active, counts, np.iinfo(int).max)
        counts[np.argmin(candidates)] += 1

    return tuple(counts), False


def _bounds(cloud: WeightedCloud, m: int, kind: PartitionKind):
    if m < 1:
        raise ArgumentError(f'Region count must be positive, got {m}.')

    lo = cloud.samples.min(axis=0)
    hi = cloud.samples.max(axis=0)
    shape, degenerate = _grid_shape(m, hi > lo)
    if degenerate:
        warnings.warn(
            f'All dimensions collapsed, {kind.value} partition clamped to one region.',
            DegenerateRangeWarning,
        )
        logger.warning('Degenerate sample range, partition clamped to M = 1.')

    return lo, hi, shape, degenerate


def build_random_grid(cloud: WeightedCloud, m: int, rng: RngStream) -> Partition:
    lo, hi, shape, degenerate = _bounds(cloud, m, PartitionKind.RANDOM_GRID)
    edges = tuple(
        np.sort(rng.uniform(np.nextafter(lo[i], hi[i]), hi[i], count - 1))
        for i, count in enumerate(shape)
    )
    return Partition(
        PartitionKind.RANDOM_GRID, cloud.dim, m, edges=edges, degenerate=degenerate
    )


def build_uniform_grid(cloud: WeightedCloud, m: int) -> Partition:
    lo, hi, shape, degenerate = _bounds(cloud, m, PartitionKind.UNIFORM_GRID)
    edges = tuple(
        np.linspace(lo[i], hi[i], count + 1)[1:-1] for i, count in enumerate(shape)
    )
    return Partition(
        PartitionKind.UNIFORM_GRID, cloud.dim, m, edges=edges, degenerate=degenerate
    )


def _seed_centroids(
    samples: np.ndarray, weights: np.ndarray, m: int, rng: RngStream
) -> np.ndarray:
    # k-means++ seeding with the D^2 scores scaled by the sample weights
    chosen = [int(draw_categorical(weights, 1, rng)[0])]
    d2 = cdist(samples, samples[chosen], 'sqeuclidean')[:, 0]
    for _ in range(m - 1):
        scores = weights * d2
        if scores.sum() <= 0:
            scores = d2
        if scores.sum() <= 0:  # Every sample already sits on a centroid
            break

        pick = int(draw_categorical(scores, 1, rng)[0])
        chosen.append(pick)
        d2 = np.minimum(d2, cdist(samples, samples[[pick]], 'sqeuclidean')[:, 0])

    return samples[chosen].copy()


def build_voronoi(
    cloud: WeightedCloud,
    m: int,
    rng: RngStream,
    max_iter: int = 50,
    tol: float = 1e-8,
) -> Partition:
    """Weighted Lloyd k-means; regions are the nearest-centroid cells.

    With ``m >= N`` every sample seeds its own centroid, which is the
    configuration the seeding converges to anyway, so no draws are taken.
    """
    n = len(cloud)
    if m < 1 or m > n:
        raise ArgumentError(f'Voronoi partition needs 1 <= M <= N, got M = {m}.')

    samples = cloud.samples
    weights = cloud.normalized
    if m == n:
        return Partition(
            PartitionKind.VORONOI, cloud.dim, m, centroids=samples.copy()
        )

    centroids = _seed_centroids(samples, weights, m, rng)
    k = len(centroids)
    for _ in range(max_iter):
        distances = cdist(samples, centroids, 'sqeuclidean')
        labels = distances.argmin(axis=1)
        mass = np.bincount(labels, weights=weights, minlength=k)
        members = np.bincount(labels, minlength=k)

        weighted = np.zeros_like(centroids)
        np.add.at(weighted, labels, weights[:, None] * samples)
        plain = np.zeros_like(centroids)
        np.add.at(plain, labels, samples)

        updated = centroids.copy()
        massive = mass > 0
        updated[massive] = weighted[massive] / mass[massive, None]
        weightless = (~massive) & (members > 0)
        updated[weightless] = plain[weightless] / members[weightless, None]

        # Empty clusters restart at the heaviest sample not sitting on a centroid
        unclaimed = distances[np.arange(n), labels] > 0
        for j in np.flatnonzero(members == 0):
            if not unclaimed.any():
                break

            pick = int(np.argmax(np.where(unclaimed, weights, -1.0)))
            updated[j] = samples[pick]
            unclaimed[pick] = False

        shift = np.max(np.abs(updated - centroids))
        scale = max(np.max(np.abs(updated)), np.finfo(float).tiny)
        centroids = updated
        if shift <= tol * scale:
            break

    return Partition(PartitionKind.VORONOI, cloud.dim, m, centroids=centroids)


def build(
    kind: PartitionKind, cloud: WeightedCloud, m: int, rng: RngStream
) -> Partition:
    kind = PartitionKind(kind)
    if kind is PartitionKind.RANDOM_GRID:
        return build_random_grid(cloud, m, rng)
    elif kind is PartitionKind.UNIFORM_GRID:
        return build_uniform_grid(cloud, m)

    return build_voronoi(cloud, min(m, len(cloud)), rng)


def assign(partition: Partition, cloud: WeightedCloud) -> IndexSets:
    if cloud.dim != partition.dim:
        raise DimensionMismatch(partition.dim, cloud.dim)

    raw = partition.cells(cloud.samples)
    cells, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(first, kind='stable')
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return IndexSets(labels=rank[inverse.reshape(-1)], cells=cells[order])
