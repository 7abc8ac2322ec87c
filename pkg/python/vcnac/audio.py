'''Multichannel audio buffers and WAV file IO

An `AudioBuffer` is an immutable value: the sample array is stored
channels-first as float32 and flagged read-only. WAV files are read
through libsndfile (via soundfile). 16-bit and 24-bit PCM as well as
32-bit IEEE float are accepted; only 32-bit float is written so that a
write/read roundtrip is bit-exact.
'''

import dataclasses
import enum
import logging
import math
import struct
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import soundfile

from .errors import (
    AudioFormatError, AudioIOError, ContractError, LayoutError,
)


LOGGER = logging.getLogger(__name__)

CODEC_SAMPLE_RATE = 48000

_READABLE_SUBTYPES = ('PCM_16', 'PCM_24', 'FLOAT')
_READABLE_FORMATS = ('WAV', 'WAVEX')

_SAMPLE_BYTES = {'PCM_16': 2, 'PCM_24': 3, 'FLOAT': 4}

# data chunk size written by streaming encoders that never seek back
_UNKNOWN_SIZE = 0xFFFFFFFF

PathLike = Union[str, Path]


class ChannelLayout(enum.IntEnum):
    '''Supported channel layouts

    The integer value is the layout code stored in encoded streams.
    '''
    MONO = 0
    STEREO = 1
    SURROUND51 = 2

    @property
    def channel_names(self) -> Tuple[str, ...]:
        return _CHANNEL_NAMES[self]

    @property
    def channel_count(self) -> int:
        return len(_CHANNEL_NAMES[self])

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_channel_count(cls, count: int) -> 'ChannelLayout':
        for layout in cls:
            if layout.channel_count == count:
                return layout
        raise AudioFormatError(
            f'no channel layout with {count} channels '
            '(supported: 1, 2 or 6)'
        )

    @classmethod
    def from_label(cls, label: str) -> 'ChannelLayout':
        try:
            return cls[label.upper()]
        except KeyError:
            raise LayoutError(f'unknown channel layout {label!r}') from None


_CHANNEL_NAMES = {
    ChannelLayout.MONO: ('M',),
    ChannelLayout.STEREO: ('L', 'R'),
    ChannelLayout.SURROUND51: ('L', 'R', 'C', 'LFE', 'Ls', 'Rs'),
}


@dataclasses.dataclass(frozen=True, eq=False)
class AudioBuffer:
    '''Sampled audio with a declared layout

    `samples` has shape (channels, frames). Values are nominally in
    [-1, 1] but are never clipped.
    '''
    sample_rate: int
    layout: ChannelLayout
    samples: np.ndarray

    def __post_init__(self):
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ContractError(
                f'sample rate must be a positive integer, got '
                f'{self.sample_rate}'
            )
        samples = np.array(self.samples, dtype=np.float32, copy=True)
        if samples.ndim != 2:
            raise LayoutError(
                f'samples must be (channels, frames), got shape '
                f'{samples.shape}'
            )
        layout = ChannelLayout(self.layout)
        if samples.shape[0] != layout.channel_count:
            raise LayoutError(
                f'{layout.label} layout needs {layout.channel_count} '
                f'channels, got {samples.shape[0]}'
            )
        samples.setflags(write=False)
        object.__setattr__(self, 'sample_rate', int(self.sample_rate))
        object.__setattr__(self, 'layout', layout)
        object.__setattr__(self, 'samples', samples)

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.frames / self.sample_rate

    def channel(self, name: str) -> np.ndarray:
        '''Samples of the channel with the given layout name, e.g. "Ls"'''
        try:
            index = self.layout.channel_names.index(name)
        except ValueError:
            raise LayoutError(
                f'{self.layout.label} layout has no channel {name!r}'
            ) from None
        return self.samples[index]

    def __eq__(self, other) -> bool:
        if not isinstance(other, AudioBuffer):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.layout == other.layout
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @classmethod
    def from_channels(cls, sample_rate: int, channels) -> 'AudioBuffer':
        '''Build a buffer inferring the layout from the channel count'''
        samples = np.atleast_2d(np.asarray(channels, dtype=np.float32))
        layout = ChannelLayout.from_channel_count(samples.shape[0])
        return cls(sample_rate, layout, samples)

    @classmethod
    def silence(cls, sample_rate: int, layout: ChannelLayout,
                frames: int) -> 'AudioBuffer':
        return cls(sample_rate, layout,
                   np.zeros((layout.channel_count, frames), np.float32))


def _declared_data_bytes(path: PathLike) -> Optional[int]:
    '''Size of the data chunk as the RIFF chunk table declares it

    None when the table cannot be walked up to a data chunk; libsndfile
    then decides whether the file is readable at all.
    '''
    chunk_header = struct.Struct('<4sI')
    with open(path, 'rb') as fid:
        riff = fid.read(12)
        if len(riff) < 12 or riff[:4] != b'RIFF' or riff[8:] != b'WAVE':
            return None
        while True:
            header = fid.read(chunk_header.size)
            if len(header) < chunk_header.size:
                return None
            name, size = chunk_header.unpack(header)
            if name == b'data':
                return size
            # chunks are word aligned
            fid.seek(size + (size & 1), 1)


def _check_complete(path: PathLike, f: soundfile.SoundFile):
    try:
        declared = _declared_data_bytes(path)
    except OSError as e:
        raise AudioIOError(f'cannot read {path}: {e}') from e
    if declared is None or declared == _UNKNOWN_SIZE:
        return
    expected = declared // (f.channels * _SAMPLE_BYTES[f.subtype])
    if f.frames < expected:
        raise AudioIOError(
            f'{path} is truncated: header declares {expected} frames, '
            f'file holds {f.frames}'
        )


def read_wav(path: PathLike) -> AudioBuffer:
    '''Read a 1, 2 or 6 channel RIFF/WAVE file as float32

    Integer encodings are scaled by 1/2^(bits-1), so a 16-bit sample of
    -32768 becomes exactly -1.0. A file holding fewer sample frames than
    its data chunk declares is rejected as truncated.
    '''
    try:
        with soundfile.SoundFile(str(path)) as f:
            if f.format not in _READABLE_FORMATS:
                raise AudioFormatError(
                    f'{path}: not a RIFF/WAVE file ({f.format})'
                )
            if f.subtype not in _READABLE_SUBTYPES:
                raise AudioFormatError(
                    f'{path}: unsupported WAV encoding {f.subtype}'
                )
            layout = ChannelLayout.from_channel_count(f.channels)
            _check_complete(path, f)
            data = f.read(dtype='float32', always_2d=True)
            sample_rate = f.samplerate
    except RuntimeError as e:
        # libsndfile reports missing, truncated and malformed files alike
        raise AudioIOError(f'cannot read {path}: {e}') from e
    LOGGER.debug('read %s: %d Hz, %s, %d frames',
                 path, sample_rate, layout.label, data.shape[0])
    return AudioBuffer(sample_rate, layout, data.T)


def write_wav(buffer: AudioBuffer, path: PathLike) -> None:
    '''Write a buffer as an IEEE float-32 WAV file'''
    try:
        soundfile.write(str(path), buffer.samples.T, buffer.sample_rate,
                        subtype='FLOAT', format='WAV')
    except (RuntimeError, OSError) as e:
        raise AudioIOError(f'cannot write {path}: {e}') from e
    LOGGER.debug('wrote %s: %d frames', path, buffer.frames)


def chunk(buffer: AudioBuffer, chunk_seconds: float) -> List[AudioBuffer]:
    '''Split into consecutive, non-overlapping chunks

    The final partial chunk is dropped.
    '''
    if not math.isfinite(chunk_seconds):
        raise ContractError(f'chunk length must be finite: {chunk_seconds}')
    chunk_frames = int(round(chunk_seconds * buffer.sample_rate))
    if chunk_frames < 1:
        raise ContractError(
            f'chunk of {chunk_seconds} s is shorter than one sample'
        )
    count = buffer.frames // chunk_frames
    return [
        AudioBuffer(
            buffer.sample_rate, buffer.layout,
            buffer.samples[:, i * chunk_frames:(i + 1) * chunk_frames],
        )
        for i in range(count)
    ]
