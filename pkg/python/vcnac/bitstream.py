'''VCNB stream format

Header, 23 bytes, integers little-endian:

    magic          4 bytes  b'VCNB'
    version        u8       1
    sample_rate    u32
    source_layout  u8       0 mono, 1 stereo, 2 surround 5.1
    n_codebooks    u8       1..26
    n_frames       u32
    config_digest  8 bytes

The payload follows, MSB-first within each byte: per frame a 14-bit
index for codebook 0 then a 12-bit index for every further codebook,
frames back to back, the last byte zero-padded.
'''

import dataclasses
import struct
from typing import Optional, Tuple

import numpy as np

from .audio import ChannelLayout
from .errors import (ConfigError, ContractError, EncodeError,
                     StreamFormatError, TruncationError)
from .rvq import FIRST_FIELD_BITS, REST_FIELD_BITS, CodeIndices


MAGIC = b'VCNB'
VERSION = 1
MAX_CODEBOOKS = 26

HEADER = struct.Struct('<4sBIBBI8s')


def bits_per_frame(n_codebooks: int) -> int:
    if not 1 <= n_codebooks <= MAX_CODEBOOKS:
        raise ContractError(
            f'n_codebooks must be in [1, {MAX_CODEBOOKS}], got {n_codebooks}'
        )
    return FIRST_FIELD_BITS + REST_FIELD_BITS * (n_codebooks - 1)


def bitrate(n_codebooks: int, frame_rate: float = 25.0) -> float:
    '''Payload bits per second'''
    return bits_per_frame(n_codebooks) * float(frame_rate)


def field_widths(n_codebooks: int) -> np.ndarray:
    bits_per_frame(n_codebooks)
    widths = np.full(n_codebooks, REST_FIELD_BITS, dtype=np.int64)
    widths[0] = FIRST_FIELD_BITS
    return widths


@dataclasses.dataclass(frozen=True)
class StreamHeader:
    sample_rate: int
    source_layout: ChannelLayout
    n_codebooks: int
    n_frames: int
    config_digest: bytes

    def __post_init__(self):
        object.__setattr__(self, 'source_layout',
                           ChannelLayout(self.source_layout))
        bits_per_frame(self.n_codebooks)
        if not 0 < self.sample_rate < 1 << 32:
            raise ContractError(f'sample rate {self.sample_rate} out of range')
        if not 0 <= self.n_frames < 1 << 32:
            raise ContractError(f'frame count {self.n_frames} out of range')
        if len(self.config_digest) != 8:
            raise ContractError('config digest must be 8 bytes')

    @property
    def bits_per_frame(self) -> int:
        return bits_per_frame(self.n_codebooks)

    @property
    def payload_bits(self) -> int:
        return self.n_frames * self.bits_per_frame

    @property
    def payload_bytes(self) -> int:
        return -(-self.payload_bits // 8)

    @property
    def stream_bits(self) -> int:
        '''Header and payload bits, padding excluded'''
        return HEADER.size * 8 + self.payload_bits

    def to_bytes(self) -> bytes:
        return HEADER.pack(MAGIC, VERSION, self.sample_rate,
                           int(self.source_layout), self.n_codebooks,
                           self.n_frames, self.config_digest)


def pack(indices: CodeIndices, header: StreamHeader) -> bytes:
    if indices.n_used != header.n_codebooks:
        raise ContractError(
            f'header declares {header.n_codebooks} codebooks, indices '
            f'carry {indices.n_used}'
        )
    if indices.frames != header.n_frames:
        raise ContractError(
            f'header declares {header.n_frames} frames, indices carry '
            f'{indices.frames}'
        )
    widths = field_widths(header.n_codebooks)
    values = indices.indices
    for stage, width in enumerate(widths):
        column = values[:, stage]
        if column.size and (column.min() < 0 or column.max() >= 1 << width):
            raise EncodeError(
                f'codebook {stage} index does not fit in {width} bits'
            )
    bits = np.empty((indices.frames, header.bits_per_frame), dtype=np.uint8)
    offset = 0
    for stage, width in enumerate(widths):
        shifts = np.arange(width - 1, -1, -1)
        bits[:, offset:offset + width] = \
            (values[:, stage, None] >> shifts) & 1
        offset += width
    return header.to_bytes() + np.packbits(bits.ravel()).tobytes()


def unpack(data: bytes, expected_digest: Optional[bytes] = None
           ) -> Tuple[StreamHeader, CodeIndices]:
    '''Parse a stream, optionally checking its configuration digest'''
    data = bytes(data)
    if len(data) < HEADER.size:
        raise TruncationError(
            f'stream truncated: expected at least {HEADER.size} header '
            f'bytes, got {len(data)}'
        )
    magic, version, sample_rate, layout, n_codebooks, n_frames, digest = \
        HEADER.unpack_from(data)
    if magic != MAGIC:
        raise StreamFormatError(f'bad magic {magic!r}, expected {MAGIC!r}')
    if version != VERSION:
        raise StreamFormatError(f'unsupported stream version {version}')
    try:
        header = StreamHeader(sample_rate, ChannelLayout(layout),
                              n_codebooks, n_frames, digest)
    except ValueError as e:
        raise StreamFormatError(f'invalid stream header: {e}') from e
    expected = HEADER.size + header.payload_bytes
    if len(data) < expected:
        raise TruncationError(
            f'stream truncated: expected {expected} bytes, got {len(data)}'
        )
    if len(data) > expected:
        raise StreamFormatError(
            f'{len(data) - expected} unexpected bytes after the payload'
        )
    if expected_digest is not None and digest != expected_digest:
        raise ConfigError(
            f'stream was encoded with config {digest.hex()}, not '
            f'{bytes(expected_digest).hex()}'
        )
    bits = np.unpackbits(np.frombuffer(data, np.uint8, offset=HEADER.size))
    if np.any(bits[header.payload_bits:]):
        raise StreamFormatError('padding bits after the last frame are set')
    frames = bits[:header.payload_bits].reshape(
        n_frames, header.bits_per_frame).astype(np.int64)
    values = np.empty((n_frames, n_codebooks), dtype=np.int64)
    offset = 0
    for stage, width in enumerate(field_widths(n_codebooks)):
        weights = 1 << np.arange(width - 1, -1, -1, dtype=np.int64)
        values[:, stage] = frames[:, offset:offset + width] @ weights
        offset += width
    return header, CodeIndices(values)
