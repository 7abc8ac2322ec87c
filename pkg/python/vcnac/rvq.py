'''Residual vector quantization of the 16-dim latent

Each stage picks the codebook entry nearest (Euclidean) to the current
residual, lowest index on ties, and subtracts it. Codebooks are fitted
stage by stage with k-means (k-means++ seeding, Lloyd iterations).
'''

import dataclasses
import hashlib
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.stats
from scipy.spatial.distance import cdist

from .errors import ContractError, ShapeError


LOGGER = logging.getLogger(__name__)

FIRST_FIELD_BITS = 14
REST_FIELD_BITS = 12

# rows per distance block; bounds memory of the (rows x entries) matrix
_BLOCK_ROWS = 256


def _is_power_of_two(value: int) -> bool:
    return value >= 1 and value & (value - 1) == 0


@dataclasses.dataclass(frozen=True)
class RvqSpec:
    n_codebooks: int = 26
    first_size: int = 16384
    rest_size: int = 4096
    dim: int = 16

    def __post_init__(self):
        if not 1 <= self.n_codebooks <= 26:
            raise ContractError(
                f'n_codebooks must be in [1, 26], got {self.n_codebooks}'
            )
        if not (_is_power_of_two(self.first_size)
                and self.first_size <= 1 << FIRST_FIELD_BITS):
            raise ContractError(
                f'first codebook size must be a power of two <= 16384, '
                f'got {self.first_size}'
            )
        if not (_is_power_of_two(self.rest_size)
                and self.rest_size <= 1 << REST_FIELD_BITS):
            raise ContractError(
                f'codebook size must be a power of two <= 4096, '
                f'got {self.rest_size}'
            )
        if self.dim < 1:
            raise ContractError(f'dim must be >= 1, got {self.dim}')

    @property
    def sizes(self) -> Tuple[int, ...]:
        return (self.first_size,) + (self.rest_size,) * (self.n_codebooks - 1)


@dataclasses.dataclass(frozen=True, eq=False)
class RvqStack:
    '''Ordered codebooks, stage i has shape (sizes[i], dim)'''
    codebooks: Tuple[np.ndarray, ...]

    def __post_init__(self):
        books = []
        for i, book in enumerate(self.codebooks):
            book = np.array(book, dtype=np.float32, copy=True)
            if book.ndim != 2 or book.shape[0] < 1:
                raise ShapeError(
                    f'codebook {i} must be (entries, dim), got {book.shape}'
                )
            if not np.all(np.isfinite(book)):
                raise ContractError(f'codebook {i} has non-finite entries')
            book.setflags(write=False)
            books.append(book)
        if not books:
            raise ContractError('a stack needs at least one codebook')
        if len({b.shape[1] for b in books}) != 1:
            raise ShapeError('codebooks disagree on dimension')
        object.__setattr__(self, 'codebooks', tuple(books))

    @property
    def dim(self) -> int:
        return self.codebooks[0].shape[1]

    @property
    def sizes(self) -> Tuple[int, ...]:
        return tuple(b.shape[0] for b in self.codebooks)

    def __len__(self) -> int:
        return len(self.codebooks)

    def check(self, spec: RvqSpec) -> 'RvqStack':
        if self.sizes != spec.sizes or self.dim != spec.dim:
            raise ShapeError(
                f'stack sizes {self.sizes} x {self.dim} do not match spec '
                f'{spec.sizes} x {spec.dim}'
            )
        return self

    def digest(self) -> str:
        h = hashlib.sha256()
        for book in self.codebooks:
            h.update(np.asarray(book.shape, '<u4').tobytes())
            h.update(book.astype('<f4').tobytes())
        return h.hexdigest()


@dataclasses.dataclass(frozen=True, eq=False)
class CodeIndices:
    '''Per-frame indices, shape (frames, n_used)'''
    indices: np.ndarray

    def __post_init__(self):
        indices = np.array(self.indices, dtype=np.int64, copy=True)
        if indices.ndim != 2:
            raise ShapeError(
                f'indices must be (frames, n_used), got {indices.shape}'
            )
        indices.setflags(write=False)
        object.__setattr__(self, 'indices', indices)

    @property
    def frames(self) -> int:
        return self.indices.shape[0]

    @property
    def n_used(self) -> int:
        return self.indices.shape[1]

    def validate(self, sizes: Sequence[int]) -> 'CodeIndices':
        if self.n_used > len(sizes):
            raise ContractError(
                f'{self.n_used} stages used but only {len(sizes)} exist'
            )
        for stage in range(self.n_used):
            column = self.indices[:, stage]
            if column.size and (column.min() < 0
                                or column.max() >= sizes[stage]):
                raise ContractError(
                    f'stage {stage} index outside [0, {sizes[stage]})'
                )
        return self

    def __eq__(self, other) -> bool:
        if not isinstance(other, CodeIndices):
            return NotImplemented
        return np.array_equal(self.indices, other.indices)

    __hash__ = None


@dataclasses.dataclass(frozen=True, eq=False)
class QuantizeResult:
    indices: CodeIndices
    quantized: np.ndarray
    residual: np.ndarray
    residual_energy: np.ndarray


def nearest(points: np.ndarray,
            entries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    '''Index of and squared distance to the nearest entry per point

    Ties resolve to the lowest index.
    '''
    points = np.asarray(points, dtype=np.float64)
    entries = np.asarray(entries, dtype=np.float64)
    index = np.empty(points.shape[0], dtype=np.int64)
    distance = np.empty(points.shape[0], dtype=np.float64)
    for start in range(0, points.shape[0], _BLOCK_ROWS):
        block = cdist(points[start:start + _BLOCK_ROWS], entries,
                      'sqeuclidean')
        chosen = np.argmin(block, axis=1)
        index[start:start + _BLOCK_ROWS] = chosen
        distance[start:start + _BLOCK_ROWS] = \
            block[np.arange(block.shape[0]), chosen]
    return index, distance


def _as_frames(latents: np.ndarray, dim: int) -> np.ndarray:
    frames = np.asarray(latents)
    if frames.ndim != 2 or frames.shape[1] != dim:
        raise ShapeError(
            f'latents must be (frames, {dim}), got {frames.shape}'
        )
    return frames


def _check_n_used(stack: RvqStack, n_used: int):
    if not 1 <= n_used <= len(stack):
        raise ContractError(
            f'n_used must be in [1, {len(stack)}], got {n_used}'
        )


def quantize(latents: np.ndarray, stack: RvqStack,
             n_used: int) -> QuantizeResult:
    '''Quantize (frames, dim) latents with the first n_used stages

    `residual_energy[i]` is the mean squared norm, over frames, of the
    residual left after stage i. `residual` is latents - quantized.
    '''
    _check_n_used(stack, n_used)
    frames = _as_frames(latents, stack.dim)
    residual = frames.astype(np.float64)
    indices = np.zeros((frames.shape[0], n_used), dtype=np.int64)
    energy = np.zeros(n_used, dtype=np.float64)
    for stage in range(n_used):
        book = stack.codebooks[stage]
        chosen, _ = nearest(residual, book)
        indices[:, stage] = chosen
        residual = residual - book[chosen].astype(np.float64)
        energy[stage] = (np.mean(np.sum(residual ** 2, axis=1))
                         if residual.shape[0] else 0.0)
    codes = CodeIndices(indices)
    quantized = dequantize(codes, stack, n_used)
    return QuantizeResult(
        indices=codes,
        quantized=quantized,
        residual=frames.astype(np.float64) - quantized.astype(np.float64),
        residual_energy=energy,
    )


def dequantize(indices: CodeIndices, stack: RvqStack,
               n_used: Optional[int] = None) -> np.ndarray:
    '''Sum of the addressed entries of the first n_used stages'''
    if n_used is None:
        n_used = indices.n_used
    _check_n_used(stack, n_used)
    if n_used > indices.n_used:
        raise ContractError(
            f'indices carry {indices.n_used} stages, {n_used} requested'
        )
    indices.validate(stack.sizes)
    total = np.zeros((indices.frames, stack.dim), dtype=np.float64)
    for stage in range(n_used):
        total += stack.codebooks[stage][indices.indices[:, stage]]
    return total.astype(np.float32)


def _kmeans_plus_plus(points: np.ndarray, k: int,
                      rng: np.random.Generator) -> np.ndarray:
    centroids = np.empty((k, points.shape[1]), dtype=np.float64)
    centroids[0] = points[rng.integers(points.shape[0])]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total > 0.0:
            pick = rng.choice(points.shape[0], p=closest / total)
        else:
            # fewer distinct points than clusters
            pick = rng.integers(points.shape[0])
        centroids[i] = points[pick]
        closest = np.minimum(
            closest, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def reseed_empty_clusters(points: np.ndarray, centroids: np.ndarray,
                          occupied: np.ndarray) -> None:
    '''Move unoccupied centroids, in place, onto the points farthest from
    the occupied ones'''
    empty = np.flatnonzero(~occupied)
    _, distance = nearest(points, centroids[occupied])
    order = np.argsort(-distance, kind='stable')
    centroids[empty] = points[order[:empty.size]]


def kmeans(points: np.ndarray, k: int, iters: int,
           rng: np.random.Generator,
           history: Optional[List[float]] = None) -> np.ndarray:
    '''Lloyd k-means from k-means++ seeds

    Empty clusters are re-seeded from the points farthest from the
    centroids just updated. When given, `history` receives the mean
    squared distance after seeding and after every iteration; it never
    increases.
    '''
    points = np.asarray(points, dtype=np.float64)
    if points.shape[0] < k:
        raise ContractError(
            f'{points.shape[0]} samples cannot fit {k} centroids'
        )
    centroids = _kmeans_plus_plus(points, k, rng)
    labels, distance = nearest(points, centroids)
    if history is not None:
        history.append(float(distance.mean()))
    for iteration in range(iters):
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, points)
        occupied = counts > 0
        centroids[occupied] = sums[occupied] / counts[occupied, None]
        empty = np.flatnonzero(~occupied)
        if empty.size:
            LOGGER.debug('k-means iteration %d: reseeding %d empty clusters',
                         iteration, empty.size)
            reseed_empty_clusters(points, centroids, occupied)
        new_labels, distance = nearest(points, centroids)
        if history is not None:
            history.append(float(distance.mean()))
        converged = np.array_equal(new_labels, labels) and not empty.size
        labels = new_labels
        if converged:
            break
    return centroids


def fit_codebooks_kmeans(samples: np.ndarray, spec: RvqSpec, iters: int,
                         seed: int) -> RvqStack:
    '''Fit every stage on the residual left by the stages before it'''
    residual = _as_frames(samples, spec.dim).astype(np.float64)
    if residual.shape[0] < max(spec.sizes):
        raise ContractError(
            f'{residual.shape[0]} samples, at least {max(spec.sizes)} '
            'needed to fit the largest codebook'
        )
    rng = np.random.default_rng(seed)
    books = []
    for stage, size in enumerate(spec.sizes):
        centroids = kmeans(residual, size, iters, rng)
        books.append(centroids)
        chosen, _ = nearest(residual, centroids)
        residual = residual - centroids[chosen]
        LOGGER.info('stage %d: %d entries, residual energy %.6g',
                    stage, size, np.mean(np.sum(residual ** 2, axis=1)))
    return RvqStack(tuple(books))


@dataclasses.dataclass(frozen=True)
class CodebookStats:
    stage: int
    usage: float
    perplexity: float


def codebook_stats(indices: CodeIndices,
                   spec: RvqSpec) -> List[CodebookStats]:
    '''Usage fraction and perplexity per used stage'''
    sizes = spec.sizes
    stats = []
    for stage in range(indices.n_used):
        column = indices.indices[:, stage]
        if column.size == 0:
            stats.append(CodebookStats(stage, 0.0, 1.0))
            continue
        counts = np.bincount(column, minlength=sizes[stage])
        usage = np.count_nonzero(counts) / sizes[stage]
        perplexity = float(np.exp(scipy.stats.entropy(counts)))
        stats.append(CodebookStats(stage, float(usage), perplexity))
    return stats
