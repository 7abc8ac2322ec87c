'''Channel-compatibility transforms

Mid/side for stereo, front/rear mid/side for 5.1 and the ITU-R
BS.775 style 5.1 to stereo downmix. Derived mono signals are float64
so that M = L + R and S = L - R hold exactly for float32 inputs.
'''

import dataclasses
import math
from typing import Tuple

import numpy as np

from .audio import AudioBuffer, ChannelLayout
from .errors import ContractError, LayoutError


_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclasses.dataclass(frozen=True)
class DownmixCoeffs:
    '''Linear gains applied to C, Ls/Rs and LFE when folding to stereo

    Defaults are the -3 dB centre and surround gains with the LFE left
    out.
    '''
    center_gain: float = _INV_SQRT2
    surround_gain: float = _INV_SQRT2
    lfe_gain: float = 0.0

    def __post_init__(self):
        for name in ('center_gain', 'surround_gain', 'lfe_gain'):
            value = getattr(self, name)
            if not (value >= 0.0 and math.isfinite(value)):
                raise ContractError(f'{name} must be >= 0, got {value}')


def _require(buffer: AudioBuffer, layout: ChannelLayout, what: str):
    if buffer.layout != layout:
        raise LayoutError(
            f'{what} needs {layout.label} input, got {buffer.layout.label}'
        )


def _sum_difference(a: np.ndarray, b: np.ndarray):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return a + b, a - b


def mid_side(stereo: AudioBuffer) -> Tuple[np.ndarray, np.ndarray]:
    '''Mid M = L + R and side S = L - R'''
    _require(stereo, ChannelLayout.STEREO, 'mid/side')
    return _sum_difference(stereo.samples[0], stereo.samples[1])


def inverse_mid_side(mid: np.ndarray, side: np.ndarray,
                     sample_rate: int = 48000) -> AudioBuffer:
    '''Stereo from mid/side via L = (M + S) / 2 and R = (M - S) / 2'''
    mid = np.asarray(mid, dtype=np.float64)
    side = np.asarray(side, dtype=np.float64)
    if mid.ndim != 1 or mid.shape != side.shape:
        raise ContractError(
            f'mid and side must be equal-length mono signals, got '
            f'{mid.shape} and {side.shape}'
        )
    left = (mid + side) / 2.0
    right = (mid - side) / 2.0
    return AudioBuffer(sample_rate, ChannelLayout.STEREO,
                       np.stack([left, right]))


def front_rear_midside(surround: AudioBuffer) -> Tuple[np.ndarray, ...]:
    '''(front_mid, front_side, rear_mid, rear_side) of a 5.1 buffer

    The front pair is (L, R) and the rear pair (Ls, Rs); C and LFE do
    not take part.
    '''
    _require(surround, ChannelLayout.SURROUND51, 'front/rear mid/side')
    front_mid, front_side = _sum_difference(surround.channel('L'),
                                            surround.channel('R'))
    rear_mid, rear_side = _sum_difference(surround.channel('Ls'),
                                          surround.channel('Rs'))
    return front_mid, front_side, rear_mid, rear_side


def downmix_matrix(coeffs: DownmixCoeffs) -> np.ndarray:
    '''2 x 6 matrix mapping (L, R, C, LFE, Ls, Rs) to (Lo, Ro)'''
    c, s, g = coeffs.center_gain, coeffs.surround_gain, coeffs.lfe_gain
    return np.array([
        [1.0, 0.0, c, g, s, 0.0],
        [0.0, 1.0, c, g, 0.0, s],
    ])


def downmix_51_to_stereo(surround: AudioBuffer,
                         coeffs: DownmixCoeffs = DownmixCoeffs()
                         ) -> AudioBuffer:
    '''Fold 5.1 to stereo; the result is not clipped'''
    _require(surround, ChannelLayout.SURROUND51, 'downmix')
    stereo = downmix_matrix(coeffs) @ surround.samples.astype(np.float64)
    return AudioBuffer(surround.sample_rate, ChannelLayout.STEREO, stereo)
