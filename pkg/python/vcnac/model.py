'''Codec configuration and parameter manifest

The manifest lists every learned tensor of a configuration by name
and shape, in a fixed order. Weight containers, random initialisation
and parameter counting all derive from it.

Naming:
    encoder.input.*                      stride-1 input convolution
    encoder.block{b}.unit{u}.*           residual units before stride b
    encoder.block{b}.{snake,conv}.*      strided convolution
    encoder.attention.layer0.*           pre-fusion attention
    encoder.proj.*                       pointwise projection to latent
    decoder.proj.*                       pointwise projection from latent
    decoder.attention.layer0.*           post-split attention
    decoder.block{b}.{snake,conv}.*      transposed convolution
    decoder.block{b}.unit{u}.*           residual units after it
    decoder.output.*                     final convolution
    embeddings.{encoder,decoder}         channel embeddings
    rvq.codebook.{i}                     quantizer codebooks
'''

import dataclasses
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from . import config as kv
from .errors import ConfigError, ContractError
from .nn import AttentionSpec, attention_shapes
from .rvq import RvqSpec


PathLike = Union[str, Path]

TOTAL_STRIDE = 1920
FRAME_RATE = 25

COMPONENTS = ('encoder', 'decoder', 'quantizer', 'embeddings')

# 'concat' stacks the channel slots as input columns of one stream
FUSIONS = ('sum', 'mean', 'concat')


@dataclasses.dataclass(frozen=True)
class CodecConfig:
    '''Architecture of a variable-channel codec

    `encoder_widths` has one entry per stage boundary: the width after
    the input convolution and after each strided block. The decoder
    widths run the other way, from the latent projection to the last
    transposed block. Default widths give the decoder about twice the
    encoder's parameters.
    '''
    sample_rate: int = 48000
    strides: Tuple[int, ...] = (2, 4, 5, 6, 8)
    latent_dim: int = 16
    max_channels: int = 6
    encoder_widths: Tuple[int, ...] = (32, 64, 128, 256, 512, 1024)
    decoder_widths: Tuple[int, ...] = (1472, 736, 368, 184, 92, 46)
    input_kernel: int = 7
    residual_kernel: int = 7
    residual_dilations: Tuple[int, ...] = (1, 3, 9)
    activation: str = 'snake'
    fusion: str = 'sum'
    use_attention: bool = True
    embedding_sigma: float = 0.01
    attention: AttentionSpec = AttentionSpec()
    rvq: RvqSpec = RvqSpec()

    def __post_init__(self):
        stages = len(self.strides)
        if int(np.prod(self.strides)) != TOTAL_STRIDE:
            raise ContractError(
                f'strides {self.strides} must multiply to {TOTAL_STRIDE}'
            )
        if self.sample_rate != TOTAL_STRIDE * FRAME_RATE:
            raise ContractError(
                f'sample rate must be {TOTAL_STRIDE * FRAME_RATE} Hz, got '
                f'{self.sample_rate}'
            )
        if self.latent_dim != self.rvq.dim:
            raise ContractError('latent_dim must equal the quantizer dim')
        if len(self.encoder_widths) != stages + 1 \
                or len(self.decoder_widths) != stages + 1:
            raise ContractError(
                f'{stages} strides need {stages + 1} widths per side'
            )
        if min(self.encoder_widths + self.decoder_widths) < 1:
            raise ContractError('widths must be positive')
        if not 1 <= self.max_channels <= 6:
            raise ContractError('max_channels must be in [1, 6]')
        if min(self.encoder_widths[0], self.decoder_widths[0]) \
                < self.max_channels:
            raise ContractError(
                'embedding widths must be >= max_channels to hold '
                'orthogonal channel embeddings'
            )
        if self.activation not in ('snake', 'elu'):
            raise ContractError(f'unknown activation {self.activation!r}')
        if self.fusion not in FUSIONS:
            raise ContractError(f'unknown fusion {self.fusion!r}')
        if self.use_attention:
            self.attention.head_dim(self.encoder_widths[-1])
            self.attention.head_dim(self.decoder_widths[0])

    @property
    def hop_length(self) -> int:
        return int(np.prod(self.strides))

    @property
    def frame_rate(self) -> float:
        return self.sample_rate / self.hop_length

    def frame_count(self, samples: int) -> int:
        return max(1, -(-samples // self.hop_length))

    def digest(self) -> bytes:
        return kv.config_digest(self)

    def to_file(self, path: PathLike) -> None:
        kv.write_key_value(kv.to_entries(self), path)

    @classmethod
    def from_file(cls, path: PathLike) -> 'CodecConfig':
        return kv.from_entries(cls, kv.read_key_value(path))

    @classmethod
    def tiny(cls, width: int = 8, **overrides) -> 'CodecConfig':
        '''Small configuration for tests and smoke runs'''
        stages = len(overrides.get('strides', cls.strides)) + 1
        fields = dict(encoder_widths=(width,) * stages,
                      decoder_widths=(width,) * stages)
        fields.update(overrides)
        return cls(**fields)


def _residual_unit_shapes(prefix: str, width: int,
                          config: CodecConfig) -> List[Tuple[str, tuple]]:
    shapes = []
    for unit, _ in enumerate(config.residual_dilations):
        p = f'{prefix}.unit{unit}'
        if config.activation == 'snake':
            shapes.append((f'{p}.snake1.alpha', (width,)))
        shapes += [
            (f'{p}.conv1.weight', (width, width, config.residual_kernel)),
            (f'{p}.conv1.bias', (width,)),
        ]
        if config.activation == 'snake':
            shapes.append((f'{p}.snake2.alpha', (width,)))
        shapes += [
            (f'{p}.conv2.weight', (width, width, 1)),
            (f'{p}.conv2.bias', (width,)),
        ]
    return shapes


def _snake_shape(name: str, width: int, config: CodecConfig):
    return [(name, (width,))] if config.activation == 'snake' else []


def _input_columns(config: CodecConfig) -> int:
    return config.max_channels if config.fusion == 'concat' else 1


def parameter_shapes(config: CodecConfig) -> List[Tuple[str, tuple]]:
    '''Ordered (name, shape) of every learned tensor'''
    enc = config.encoder_widths
    dec = config.decoder_widths
    latent = config.latent_dim
    shapes = [
        ('encoder.input.weight', (enc[0], _input_columns(config),
                                  config.input_kernel)),
        ('encoder.input.bias', (enc[0],)),
    ]
    for b, stride in enumerate(config.strides):
        p = f'encoder.block{b}'
        shapes += _residual_unit_shapes(p, enc[b], config)
        shapes += _snake_shape(f'{p}.snake.alpha', enc[b], config)
        shapes += [
            (f'{p}.conv.weight', (enc[b + 1], enc[b], 2 * stride)),
            (f'{p}.conv.bias', (enc[b + 1],)),
        ]
    if config.use_attention:
        shapes += attention_shapes(enc[-1], config.attention,
                                   'encoder.attention')
    shapes += [
        ('encoder.proj.weight', (latent, enc[-1], 1)),
        ('encoder.proj.bias', (latent,)),
        ('decoder.proj.weight', (dec[0], latent, 1)),
        ('decoder.proj.bias', (dec[0],)),
    ]
    if config.use_attention:
        shapes += attention_shapes(dec[0], config.attention,
                                   'decoder.attention')
    for b, stride in enumerate(reversed(config.strides)):
        p = f'decoder.block{b}'
        shapes += _snake_shape(f'{p}.snake.alpha', dec[b], config)
        shapes += [
            (f'{p}.conv.weight', (dec[b], dec[b + 1], 2 * stride)),
            (f'{p}.conv.bias', (dec[b + 1],)),
        ]
        shapes += _residual_unit_shapes(p, dec[b + 1], config)
    shapes += _snake_shape('decoder.output.snake.alpha', dec[-1], config)
    shapes += [
        ('decoder.output.weight', (1, dec[-1], config.input_kernel)),
        ('decoder.output.bias', (1,)),
        ('embeddings.decoder', (config.max_channels, dec[0])),
    ]
    if config.fusion != 'concat':
        shapes.insert(-1, ('embeddings.encoder',
                           (config.max_channels, enc[0])))
    shapes += [(f'rvq.codebook.{i}', (size, config.rvq.dim))
               for i, size in enumerate(config.rvq.sizes)]
    return shapes


def component_of(name: str) -> str:
    if name.startswith('rvq.'):
        return 'quantizer'
    head = name.split('.', 1)[0]
    if head not in COMPONENTS:
        raise ConfigError(f'parameter {name!r} belongs to no component')
    return head


def param_count(config: CodecConfig) -> Dict[str, int]:
    '''Exact parameter count per component, plus their total'''
    counts = dict.fromkeys(COMPONENTS, 0)
    for name, shape in parameter_shapes(config):
        counts[component_of(name)] += int(np.prod(shape))
    counts['total'] = sum(counts[c] for c in COMPONENTS)
    return counts
