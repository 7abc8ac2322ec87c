'''Weight container

A `WeightStore` is an immutable mapping from parameter name to float32
array, tagged with the digest of the codec configuration it belongs to.
On disk it is a VCNW file, all integers little-endian:

    magic        4 bytes  b'VCNW'
    version      u8       1
    config       8 bytes  configuration digest
    count        u32      number of tensors
    manifest     per tensor:
                     name length u16, UTF-8 name,
                     ndim u8, dims u32 * ndim,
                     byte offset u64 into the blob
    blob length  u64
    blob         contiguous float32 payload
'''

import hashlib
import logging
import math
import struct
from collections.abc import Mapping
from pathlib import Path
from typing import Dict, Iterator, Tuple, Union

import numpy as np

from .errors import ConfigError, WeightFormatError
from .model import CodecConfig, parameter_shapes
from .rvq import RvqStack


LOGGER = logging.getLogger(__name__)

MAGIC = b'VCNW'
VERSION = 1

PathLike = Union[str, Path]

_HEADER = struct.Struct('<4sB8sI')


class WeightStore(Mapping):
    '''Named float32 tensors; read-only after construction'''

    def __init__(self, tensors: Dict[str, np.ndarray], config_digest: bytes):
        if len(config_digest) != 8:
            raise WeightFormatError('config digest must be 8 bytes')
        self._tensors = {}
        for name, value in tensors.items():
            array = np.array(value, dtype=np.float32, copy=True)
            array.setflags(write=False)
            self._tensors[name] = array
        self.config_digest = bytes(config_digest)

    def __getitem__(self, name: str) -> np.ndarray:
        try:
            return self._tensors[name]
        except KeyError:
            raise ConfigError(f'weights have no tensor {name!r}') from None

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def manifest(self) -> Dict[str, Tuple[Tuple[int, ...], int]]:
        '''name -> (shape, byte offset) in container order'''
        entries = {}
        offset = 0
        for name, array in self._tensors.items():
            entries[name] = (array.shape, offset)
            offset += array.size * 4
        return entries

    def digest(self) -> str:
        h = hashlib.sha256(self.config_digest)
        for name, array in self._tensors.items():
            h.update(name.encode('utf-8'))
            h.update(np.asarray(array.shape, '<u4').tobytes())
            h.update(array.astype('<f4').tobytes())
        return h.hexdigest()

    def check(self, config: CodecConfig) -> 'WeightStore':
        '''Verify the store was built for this configuration'''
        if self.config_digest != config.digest():
            raise ConfigError(
                f'weights were built for config {self.config_digest.hex()}, '
                f'not {config.digest().hex()}'
            )
        for name, shape in parameter_shapes(config):
            if self[name].shape != tuple(shape):
                raise ConfigError(
                    f'{name} has shape {self[name].shape}, expected {shape}'
                )
        return self

    def rvq_stack(self, config: CodecConfig) -> RvqStack:
        return RvqStack(tuple(
            self[f'rvq.codebook.{i}'] for i in range(config.rvq.n_codebooks)
        )).check(config.rvq)

    def replace(self, updates: Dict[str, np.ndarray]) -> 'WeightStore':
        tensors = dict(self._tensors)
        for name, value in updates.items():
            if name not in tensors:
                raise ConfigError(f'weights have no tensor {name!r}')
            if np.shape(value) != tensors[name].shape:
                raise ConfigError(
                    f'{name}: replacement shape {np.shape(value)} differs '
                    f'from {tensors[name].shape}'
                )
            tensors[name] = value
        return WeightStore(tensors, self.config_digest)


def _orthogonal_rows(rng: np.random.Generator, rows: int, dim: int,
                     norm: float) -> np.ndarray:
    basis, _ = np.linalg.qr(rng.standard_normal((dim, rows)))
    return (basis.T * norm).astype(np.float32)


def random_init(config: CodecConfig, seed: int) -> WeightStore:
    '''Seeded initialisation of every tensor in the manifest

    Convolution and projection weights are normal with std 1/sqrt(fan_in)
    (residual branch outputs scaled down by 10), biases zero, snake alphas
    one and layer norms identity. Each channel embedding set is orthogonal
    with norm sigma * sqrt(width). Codebook stage i is normal with std
    0.5^i, except entry 0 which is the zero vector.
    '''
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in parameter_shapes(config):
        leaf = name.rsplit('.', 1)[-1]
        if name.startswith('embeddings.'):
            tensors[name] = _orthogonal_rows(
                rng, shape[0], shape[1],
                config.embedding_sigma * math.sqrt(shape[1]))
        elif name.startswith('rvq.codebook.'):
            stage = int(leaf)
            book = rng.standard_normal(shape) * 0.5 ** stage
            book[0] = 0.0
            tensors[name] = book
        elif leaf == 'alpha':
            tensors[name] = np.ones(shape)
        elif leaf == 'bias':
            tensors[name] = np.zeros(shape)
        elif '.norm' in name:
            tensors[name] = np.ones(shape)
        else:
            # conv kernels are (out, in, K); dense weights are (in, out)
            fan_in = (shape[1] * shape[2] if len(shape) == 3 else shape[0])
            scale = 1.0 / math.sqrt(fan_in)
            if name.endswith('conv2.weight'):
                scale *= 0.1
            tensors[name] = rng.standard_normal(shape) * scale
    store = WeightStore(tensors, config.digest())
    LOGGER.info('initialised %d tensors with seed %d', len(store), seed)
    return store


def save_weights(store: WeightStore, path: PathLike) -> None:
    manifest = store.manifest()
    parts = [_HEADER.pack(MAGIC, VERSION, store.config_digest,
                          len(manifest))]
    for name, (shape, offset) in manifest.items():
        encoded = name.encode('utf-8')
        parts.append(struct.pack('<H', len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack(f'<B{len(shape)}IQ', len(shape), *shape,
                                 offset))
    blob = b''.join(store[name].astype('<f4').tobytes() for name in manifest)
    parts.append(struct.pack('<Q', len(blob)))
    parts.append(blob)
    try:
        Path(path).write_bytes(b''.join(parts))
    except OSError as e:
        raise WeightFormatError(f'cannot write {path}: {e}') from e


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.position = 0

    def take(self, size: int) -> bytes:
        end = self.position + size
        if end > len(self.data):
            raise WeightFormatError(
                f'container truncated at byte {len(self.data)}, needed {end}'
            )
        chunk = self.data[self.position:end]
        self.position = end
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def parse_weights(data: bytes) -> WeightStore:
    cursor = _Cursor(data)
    magic, version, digest, count = cursor.unpack(_HEADER.format)
    if magic != MAGIC:
        raise WeightFormatError(f'bad magic {magic!r}, expected {MAGIC!r}')
    if version != VERSION:
        raise WeightFormatError(f'unsupported container version {version}')
    entries = []
    for _ in range(count):
        (length,) = cursor.unpack('<H')
        try:
            name = cursor.take(length).decode('utf-8')
        except UnicodeDecodeError as e:
            raise WeightFormatError(f'tensor name is not UTF-8: {e}') from e
        (ndim,) = cursor.unpack('<B')
        shape = cursor.unpack(f'<{ndim}I')
        (offset,) = cursor.unpack('<Q')
        entries.append((name, shape, offset))
    (blob_length,) = cursor.unpack('<Q')
    blob = cursor.take(blob_length)
    if cursor.position != len(data):
        raise WeightFormatError(
            f'{len(data) - cursor.position} trailing bytes after blob'
        )
    tensors = {}
    extents = []
    for name, shape, offset in entries:
        if name in tensors:
            raise WeightFormatError(f'tensor {name!r} listed twice')
        size = int(np.prod(shape, dtype=np.int64)) * 4
        if offset % 4 or offset + size > blob_length:
            raise WeightFormatError(f'tensor {name!r} lies outside the blob')
        extents.append((offset, offset + size, name))
        tensors[name] = np.frombuffer(blob, '<f4', size // 4,
                                      offset).reshape(shape)
    extents.sort()
    for (_, end, first), (start, _, second) in zip(extents, extents[1:]):
        if start < end:
            raise WeightFormatError(
                f'tensors {first!r} and {second!r} overlap'
            )
    return WeightStore(tensors, digest)


def load_weights(path: PathLike) -> WeightStore:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise WeightFormatError(f'cannot read {path}: {e}') from e
    store = parse_weights(data)
    LOGGER.debug('loaded %d tensors from %s', len(store), path)
    return store
