'''Deterministic inference kernels

Plain numpy kernels for the codec: 1-D convolutions (strided, dilated
and transposed), snake and ELU activations, layer norm, rotary
positions and the windowed attention over temporally interleaved
channel streams. Convolution tensors are channels-first (C, T);
attention streams are (T, D). All arithmetic is float32 unless noted.
'''

import dataclasses
import math
from typing import List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.special
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError


Padding = Union[int, Tuple[int, int]]

LAYER_NORM_EPS = 1e-5
ROTARY_BASE = 10000.0


def same_padding(length: int, kernel: int, stride: int = 1,
                 dilation: int = 1) -> Tuple[int, int]:
    '''(left, right) padding giving ceil(length / stride) output frames'''
    out = -(-length // stride)
    total = max((out - 1) * stride + dilation * (kernel - 1) + 1 - length, 0)
    return total // 2, total - total // 2


def conv1d(x: np.ndarray, kernel: np.ndarray,
           bias: Optional[np.ndarray] = None, stride: int = 1,
           dilation: int = 1, padding: Padding = 0) -> np.ndarray:
    '''Cross-correlation of (C_in, T) with a (C_out, C_in, K) kernel

    Output length is floor((T + pads - dilation*(K-1) - 1) / stride) + 1.
    '''
    x = np.asarray(x, dtype=np.float32)
    kernel = np.asarray(kernel, dtype=np.float32)
    if x.ndim != 2 or kernel.ndim != 3 or kernel.shape[1] != x.shape[0]:
        raise ShapeError(
            f'conv1d input {x.shape} does not match kernel {kernel.shape}'
        )
    if stride < 1 or dilation < 1:
        raise ContractError('stride and dilation must be >= 1')
    left, right = (padding, padding) if isinstance(padding, int) else padding
    x = np.pad(x, ((0, 0), (left, right)))
    span = dilation * (kernel.shape[2] - 1) + 1
    if x.shape[1] < span:
        raise ShapeError(
            f'input of {x.shape[1]} frames is shorter than the kernel '
            f'span {span}'
        )
    patches = sliding_window_view(x, span, axis=1)[:, ::stride, ::dilation]
    out = np.tensordot(kernel, patches, axes=([1, 2], [0, 2]))
    if bias is not None:
        out = out + np.asarray(bias, dtype=np.float32)[:, None]
    return out.astype(np.float32, copy=False)


def conv1d_transposed(x: np.ndarray, kernel: np.ndarray,
                      bias: Optional[np.ndarray] = None, stride: int = 1,
                      trim: bool = True) -> np.ndarray:
    '''Transposed convolution of (C_in, T) with a (C_in, C_out, K) kernel

    The full output has (T - 1) * stride + K frames. With `trim` the
    result is cut (or zero-extended) symmetrically to T * stride frames,
    the inverse of the encoder's same-by-stride padding.
    '''
    x = np.asarray(x, dtype=np.float32)
    kernel = np.asarray(kernel, dtype=np.float32)
    if x.ndim != 2 or kernel.ndim != 3 or kernel.shape[0] != x.shape[0]:
        raise ShapeError(
            f'transposed conv input {x.shape} does not match kernel '
            f'{kernel.shape}'
        )
    if stride < 1:
        raise ContractError('stride must be >= 1')
    frames = x.shape[1]
    taps = kernel.shape[2]
    full = np.zeros((kernel.shape[1], (frames - 1) * stride + taps),
                    dtype=np.float32)
    # (C_out, K, T): contribution of input frame t to output t*stride + k
    contributions = np.tensordot(kernel, x, axes=([0], [0]))
    for k in range(taps):
        full[:, k:k + (frames - 1) * stride + 1:stride] += \
            contributions[:, k, :]
    if trim:
        excess = taps - stride
        if excess >= 0:
            left = excess // 2
            full = full[:, left:left + frames * stride]
        else:
            full = np.pad(full, ((0, 0), (0, -excess)))
    if bias is not None:
        full = full + np.asarray(bias, dtype=np.float32)[:, None]
    return full


def snake(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    '''x + sin^2(alpha x) / alpha with one alpha per channel of (C, T)'''
    x = np.asarray(x, dtype=np.float32)
    alpha = np.asarray(alpha, dtype=np.float32)
    if np.any(alpha <= 0):
        raise ContractError('snake alpha must be positive')
    a = alpha.reshape((-1,) + (1,) * (x.ndim - 1))
    return x + np.sin(a * x) ** 2 / a


def elu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0))).astype(np.float32)


def gelu(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    return (0.5 * x * (1.0 + scipy.special.erf(x / math.sqrt(2.0)))
            ).astype(np.float32)


def layer_norm(x: np.ndarray, weight: np.ndarray,
               bias: np.ndarray) -> np.ndarray:
    '''Normalise over the last axis'''
    x = np.asarray(x, dtype=np.float32)
    mean = x.mean(axis=-1, keepdims=True)
    var = ((x - mean) ** 2).mean(axis=-1, keepdims=True)
    return (x - mean) / np.sqrt(var + LAYER_NORM_EPS) * weight + bias


def apply_rotary(x: np.ndarray, positions: np.ndarray) -> np.ndarray:
    '''Rotate consecutive feature pairs of (..., N, head_dim) by position

    `positions` has length N and is broadcast over the leading axes.
    '''
    head_dim = x.shape[-1]
    if head_dim % 2:
        raise ContractError(f'rotary needs an even head dim, got {head_dim}')
    inv_freq = ROTARY_BASE ** (-np.arange(0, head_dim, 2) / head_dim)
    angles = np.asarray(positions, np.float64)[:, None] * inv_freq[None, :]
    cos = np.cos(angles).astype(np.float32)
    sin = np.sin(angles).astype(np.float32)
    even = x[..., 0::2]
    odd = x[..., 1::2]
    out = np.empty_like(x, dtype=np.float32)
    out[..., 0::2] = even * cos - odd * sin
    out[..., 1::2] = even * sin + odd * cos
    return out


@dataclasses.dataclass(frozen=True)
class AttentionSpec:
    heads: int = 4
    temporal_window: int = 2
    layers: int = 1
    ffn_factor: int = 2

    def __post_init__(self):
        if self.heads < 1 or self.layers < 1 or self.ffn_factor < 1:
            raise ContractError('heads, layers and ffn_factor must be >= 1')
        if self.temporal_window < 0:
            raise ContractError('temporal_window must be >= 0')

    def head_dim(self, width: int) -> int:
        if width % self.heads or (width // self.heads) % 2:
            raise ContractError(
                f'width {width} must split into {self.heads} heads of even '
                'size'
            )
        return width // self.heads


def attention_shapes(width: int, spec: AttentionSpec,
                     prefix: str) -> List[Tuple[str, Tuple[int, ...]]]:
    '''Parameter names and shapes of an attention block'''
    spec.head_dim(width)
    hidden = spec.ffn_factor * width
    shapes = []
    for layer in range(spec.layers):
        p = f'{prefix}.layer{layer}'
        shapes += [
            (f'{p}.norm1.weight', (width,)),
            (f'{p}.norm1.bias', (width,)),
        ]
        for name in ('query', 'key', 'value', 'out'):
            shapes += [
                (f'{p}.{name}.weight', (width, width)),
                (f'{p}.{name}.bias', (width,)),
            ]
        shapes += [
            (f'{p}.norm2.weight', (width,)),
            (f'{p}.norm2.bias', (width,)),
            (f'{p}.ffn1.weight', (width, hidden)),
            (f'{p}.ffn1.bias', (hidden,)),
            (f'{p}.ffn2.weight', (hidden, width)),
            (f'{p}.ffn2.bias', (width,)),
        ]
    return shapes


def _attention_layer(x: np.ndarray, spec: AttentionSpec,
                     weights: Mapping[str, np.ndarray], p: str,
                     probabilities: Optional[list]) -> np.ndarray:
    # x: (C, T, D) with only unmasked channels
    channels, frames, width = x.shape
    heads = spec.heads
    head_dim = spec.head_dim(width)
    window = spec.temporal_window
    span = 2 * window + 1

    h = layer_norm(x, weights[f'{p}.norm1.weight'], weights[f'{p}.norm1.bias'])

    def project(name):
        y = h @ weights[f'{p}.{name}.weight'] + weights[f'{p}.{name}.bias']
        return y.reshape(channels, frames, heads, head_dim)

    positions = np.arange(frames)
    # rotary acts on (..., T, head_dim): move heads ahead of time
    q = apply_rotary(project('query').transpose(0, 2, 1, 3), positions)
    k = apply_rotary(project('key').transpose(0, 2, 1, 3), positions)
    v = project('value').transpose(0, 2, 1, 3)

    # neighbours t + delta for delta in [-window, window], all channels
    pad = ((0, 0), (0, 0), (window, window), (0, 0))
    k_win = sliding_window_view(np.pad(k, pad), span, axis=2)
    v_win = sliding_window_view(np.pad(v, pad), span, axis=2)
    valid = sliding_window_view(
        np.pad(np.ones(frames, bool), window), span)  # (T, span)

    # scores[c, h, t, j, c'] for query (t, c), key (t + j - window, c')
    scores = np.einsum('chtd,ehtdj->chtje', q, k_win) / math.sqrt(head_dim)
    scores = np.where(valid[None, None, :, :, None], scores, -np.inf)
    flat = scores.reshape(channels, heads, frames, span * channels)
    weights_ = scipy.special.softmax(flat, axis=-1).astype(np.float32)
    if probabilities is not None:
        probabilities.append(weights_)
    weights_ = weights_.reshape(scores.shape)
    attended = np.einsum('chtje,ehtdj->chtd', weights_, v_win)
    attended = attended.transpose(0, 2, 1, 3).reshape(channels, frames, width)
    x = x + (attended @ weights[f'{p}.out.weight']
             + weights[f'{p}.out.bias'])

    h = layer_norm(x, weights[f'{p}.norm2.weight'], weights[f'{p}.norm2.bias'])
    h = gelu(h @ weights[f'{p}.ffn1.weight'] + weights[f'{p}.ffn1.bias'])
    x = x + (h @ weights[f'{p}.ffn2.weight'] + weights[f'{p}.ffn2.bias'])
    return x.astype(np.float32)


def interleaved_window_attention(
        streams: Sequence[Optional[np.ndarray]], spec: AttentionSpec,
        weights: Mapping[str, np.ndarray],
        channel_mask: Optional[Sequence[bool]] = None, prefix: str = '',
        probabilities: Optional[list] = None) -> List[Optional[np.ndarray]]:
    '''Pre-norm attention over channel streams interleaved in time

    The token of channel c at frame t attends to every unmasked channel
    at frames within `temporal_window` of t, itself included. Positions
    come from the frame index only, so all channels at one frame share
    a rotation. Masked channels neither attend nor are attended to and
    are returned unchanged. When `probabilities` is a list, the softmax
    weights of every layer are appended to it as (C, heads, T, keys).
    '''
    if channel_mask is None:
        channel_mask = [s is not None for s in streams]
    if len(channel_mask) != len(streams):
        raise ShapeError('one mask entry per stream is required')
    active = [i for i, keep in enumerate(channel_mask) if keep]
    if not active:
        raise ContractError('at least one channel must be unmasked')
    shapes = {np.shape(streams[i]) for i in active}
    if len(shapes) != 1 or len(next(iter(shapes))) != 2:
        raise ShapeError(f'streams must share one (T, D) shape, got {shapes}')
    x = np.stack([np.asarray(streams[i], np.float32) for i in active])
    if prefix and not prefix.endswith('.'):
        prefix += '.'
    for layer in range(spec.layers):
        x = _attention_layer(x, spec, weights, f'{prefix}layer{layer}',
                             probabilities)
    out = list(streams)
    for slot, i in enumerate(active):
        out[i] = x[slot]
    return out
