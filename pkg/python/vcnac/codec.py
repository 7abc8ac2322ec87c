'''Variable-channel encoder and decoder

Every input channel runs through the same convolution stack, tagged by
its channel embedding. The streams meet in a windowed attention block,
are summed into one latent and projected to the quantizer dimension.
Decoding reverses this: the latent is duplicated into as many streams
as the target layout has channels, each tagged with its decoder
embedding, and every stream is upsampled by the shared decoder stack.

With concat fusion the encoder instead stacks the channels, each in the
input column of its slot, and runs a single stream from the first
convolution on.
'''

import dataclasses
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import bitstream
from .audio import AudioBuffer, ChannelLayout
from .errors import ContractError, LayoutError, SampleRateError, ShapeError
from .model import CodecConfig
from .nn import (conv1d, conv1d_transposed, elu,
                 interleaved_window_attention, same_padding, snake)
from .rvq import dequantize, quantize
from .weights import WeightStore


LOGGER = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True, eq=False)
class LatentSequence:
    '''Unified (frames, latent_dim) representation of any layout

    `source_layout` is provenance only; any layout may be decoded.
    '''
    values: np.ndarray
    source_layout: ChannelLayout

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float32, copy=True)
        if values.ndim != 2:
            raise ShapeError(
                f'latents must be (frames, dim), got {values.shape}'
            )
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'source_layout',
                           ChannelLayout(self.source_layout))

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclasses.dataclass(frozen=True)
class RoundtripDiagnostics:
    frames: int
    n_codebooks: int
    residual_energy: Tuple[float, ...]
    bits_per_frame: int
    bitrate: float


def _activate(x: np.ndarray, weights: WeightStore, name: str,
              config: CodecConfig) -> np.ndarray:
    if config.activation == 'snake':
        return snake(x, weights[f'{name}.alpha'])
    return elu(x)


def _residual_units(x: np.ndarray, weights: WeightStore, prefix: str,
                    config: CodecConfig) -> np.ndarray:
    kernel = config.residual_kernel
    for unit, dilation in enumerate(config.residual_dilations):
        p = f'{prefix}.unit{unit}'
        y = _activate(x, weights, f'{p}.snake1', config)
        y = conv1d(y, weights[f'{p}.conv1.weight'], weights[f'{p}.conv1.bias'],
                   dilation=dilation,
                   padding=same_padding(y.shape[1], kernel, 1, dilation))
        y = _activate(y, weights, f'{p}.snake2', config)
        y = conv1d(y, weights[f'{p}.conv2.weight'], weights[f'{p}.conv2.bias'])
        x = x + y
    return x


def _encode_blocks(x: np.ndarray, weights: WeightStore,
                   config: CodecConfig) -> np.ndarray:
    '''(width, samples) input features to a (frames, width) stream'''
    for b, stride in enumerate(config.strides):
        p = f'encoder.block{b}'
        x = _residual_units(x, weights, p, config)
        x = _activate(x, weights, f'{p}.snake', config)
        x = conv1d(x, weights[f'{p}.conv.weight'], weights[f'{p}.conv.bias'],
                   stride=stride,
                   padding=same_padding(x.shape[1], 2 * stride, stride))
    return x.T


def _input_conv(x: np.ndarray, weights: WeightStore,
                config: CodecConfig) -> np.ndarray:
    return conv1d(x, weights['encoder.input.weight'],
                  weights['encoder.input.bias'],
                  padding=same_padding(x.shape[1], config.input_kernel))


def _encode_channel(signal: np.ndarray, embedding: np.ndarray,
                    weights: WeightStore, config: CodecConfig) -> np.ndarray:
    '''Waveform (samples,) to a (frames, width) stream'''
    x = _input_conv(signal[None, :], weights, config)
    return _encode_blocks(x + embedding[:, None], weights, config)


def _encode_stacked(samples: np.ndarray, slots: Sequence[int],
                    weights: WeightStore, config: CodecConfig) -> np.ndarray:
    '''All channels as input columns of a single (frames, width) stream

    Channel c fills column slots[c]; unused columns stay zero.
    '''
    stacked = np.zeros((config.max_channels, samples.shape[1]), np.float32)
    stacked[list(slots)] = samples
    return _encode_blocks(_input_conv(stacked, weights, config), weights,
                          config)


def _decode_stream(stream: np.ndarray, weights: WeightStore,
                   config: CodecConfig) -> np.ndarray:
    '''(frames, width) stream to a waveform of frames * hop samples'''
    x = stream.T
    for b, stride in enumerate(reversed(config.strides)):
        p = f'decoder.block{b}'
        x = _activate(x, weights, f'{p}.snake', config)
        x = conv1d_transposed(x, weights[f'{p}.conv.weight'],
                              weights[f'{p}.conv.bias'], stride=stride)
        x = _residual_units(x, weights, p, config)
    x = _activate(x, weights, 'decoder.output.snake', config)
    x = conv1d(x, weights['decoder.output.weight'],
               weights['decoder.output.bias'],
               padding=same_padding(x.shape[1], config.input_kernel))
    return np.tanh(x[0])


def fuse(streams: Sequence[np.ndarray],
         slots: Optional[Sequence[int]] = None,
         mode: str = 'sum') -> np.ndarray:
    '''Elementwise sum (or mean) of equally shaped streams

    With `slots`, streams are summed in ascending slot order so the
    result does not depend on the order they were passed in.
    '''
    if not streams:
        raise ContractError('nothing to fuse')
    if mode not in ('sum', 'mean'):
        raise ContractError(f'unknown fusion mode {mode!r}')
    shapes = {np.shape(s) for s in streams}
    if len(shapes) != 1:
        raise ShapeError(f'cannot fuse streams of shapes {sorted(shapes)}')
    order = range(len(streams))
    if slots is not None:
        if len(slots) != len(streams):
            raise ContractError('one slot per stream is required')
        order = sorted(order, key=lambda i: slots[i])
    fused = np.zeros(next(iter(shapes)), dtype=np.float32)
    for i in order:
        fused = fused + np.asarray(streams[i], dtype=np.float32)
    if mode == 'mean':
        fused = fused / np.float32(len(streams))
    return fused


def split(fused: np.ndarray, target_channels: int,
          decoder_set: np.ndarray) -> List[np.ndarray]:
    '''Duplicate the fused stream, adding decoder embedding c to copy c'''
    decoder_set = np.asarray(decoder_set, dtype=np.float32)
    if not 1 <= target_channels <= min(6, decoder_set.shape[0]):
        raise ContractError(
            f'target channel count {target_channels} outside '
            f'[1, {min(6, decoder_set.shape[0])}]'
        )
    fused = np.asarray(fused, dtype=np.float32)
    if fused.ndim != 2 or fused.shape[1] != decoder_set.shape[1]:
        raise ShapeError(
            f'fused stream {fused.shape} does not match embeddings of '
            f'width {decoder_set.shape[1]}'
        )
    return [fused + decoder_set[c] for c in range(target_channels)]


def _check_slots(slots: Sequence[int], channels: int,
                 config: CodecConfig) -> List[int]:
    slots = [int(s) for s in slots]
    if len(slots) != channels:
        raise ContractError(f'{channels} channels need {channels} slots')
    if len(set(slots)) != channels \
            or min(slots) < 0 or max(slots) >= config.max_channels:
        raise ContractError(
            f'slots {slots} must be distinct and within '
            f'[0, {config.max_channels})'
        )
    return slots


def encode(audio: AudioBuffer, weights: WeightStore, config: CodecConfig,
           channel_slots: Optional[Sequence[int]] = None) -> LatentSequence:
    '''Encode any supported layout into one (frames, latent_dim) sequence

    Channel c uses embedding slot c unless `channel_slots` assigns
    another one. Input is zero-padded up to a whole number of frames.
    '''
    if audio.sample_rate != config.sample_rate:
        raise SampleRateError(
            f'unsupported sample rate {audio.sample_rate} Hz, codec runs '
            f'at {config.sample_rate} Hz'
        )
    if audio.channel_count > config.max_channels:
        raise LayoutError(
            f'{audio.channel_count} channels exceed the configured maximum '
            f'of {config.max_channels}'
        )
    if audio.frames == 0:
        raise ContractError('cannot encode empty audio')
    weights.check(config)
    if channel_slots is None:
        channel_slots = range(audio.channel_count)
    slots = _check_slots(channel_slots, audio.channel_count, config)

    frames = config.frame_count(audio.frames)
    padded = frames * config.hop_length
    if padded != audio.frames:
        LOGGER.debug('padding %d samples to %d (%d frames)',
                     audio.frames, padded, frames)
    samples = np.pad(audio.samples, ((0, 0), (0, padded - audio.frames)))

    if config.fusion == 'concat':
        streams = [_encode_stacked(samples, slots, weights, config)]
    else:
        order = sorted(range(audio.channel_count), key=lambda c: slots[c])
        embeddings = weights['embeddings.encoder']
        streams = [_encode_channel(samples[c], embeddings[slots[c]],
                                   weights, config)
                   for c in order]
    if config.use_attention:
        streams = interleaved_window_attention(
            streams, config.attention, weights, prefix='encoder.attention')
    if config.fusion == 'concat':
        fused = streams[0]
    else:
        fused = fuse(streams, mode=config.fusion)
    latent = conv1d(fused.T, weights['encoder.proj.weight'],
                    weights['encoder.proj.bias'])
    return LatentSequence(latent.T, audio.layout)


def decode(latents: LatentSequence, target: ChannelLayout,
           weights: WeightStore, config: CodecConfig) -> AudioBuffer:
    '''Decode latents into `target`, whatever layout they came from'''
    if latents.dim != config.latent_dim:
        raise ShapeError(
            f'latent dim {latents.dim} does not match the configured '
            f'{config.latent_dim}'
        )
    target = ChannelLayout(target)
    if target.channel_count > config.max_channels:
        raise LayoutError(
            f'{target.label} needs {target.channel_count} channels, the '
            f'codec supports {config.max_channels}'
        )
    if latents.frames == 0:
        raise ContractError('cannot decode an empty latent sequence')
    weights.check(config)
    fused = conv1d(latents.values.T, weights['decoder.proj.weight'],
                   weights['decoder.proj.bias']).T
    streams = split(fused, target.channel_count,
                    weights['embeddings.decoder'])
    if config.use_attention:
        streams = interleaved_window_attention(
            streams, config.attention, weights, prefix='decoder.attention')
    channels = [_decode_stream(s, weights, config) for s in streams]
    return AudioBuffer(config.sample_rate, target, np.stack(channels))


def roundtrip(audio: AudioBuffer, weights: WeightStore, config: CodecConfig,
              n_codebooks: int, target: Optional[ChannelLayout] = None
              ) -> Tuple[AudioBuffer, RoundtripDiagnostics]:
    '''Encode, quantize with n_codebooks stages, dequantize and decode

    The decoded audio is trimmed back to the input length. Without a
    target the source layout is reproduced.
    '''
    if target is None:
        target = audio.layout
    latents = encode(audio, weights, config)
    result = quantize(latents.values, weights.rvq_stack(config),
                      n_codebooks)
    decoded = decode(LatentSequence(result.quantized, audio.layout), target,
                     weights, config)
    trimmed = AudioBuffer(decoded.sample_rate, decoded.layout,
                          decoded.samples[:, :audio.frames])
    bits = bitstream.bits_per_frame(n_codebooks)
    diagnostics = RoundtripDiagnostics(
        frames=latents.frames,
        n_codebooks=n_codebooks,
        residual_energy=tuple(float(e) for e in result.residual_energy),
        bits_per_frame=bits,
        bitrate=bitstream.bitrate(n_codebooks, config.frame_rate),
    )
    return trimmed, diagnostics


def dequantize_latents(indices, weights: WeightStore, config: CodecConfig,
                       source_layout: ChannelLayout) -> LatentSequence:
    '''Latents addressed by stored code indices'''
    values = dequantize(indices, weights.rvq_stack(config))
    return LatentSequence(values, source_layout)
