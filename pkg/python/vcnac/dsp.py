'''Spectral and filtering primitives

STFT with centred, reflect-padded frames; HTK mel filterbanks;
Butterworth lowpass design as second-order sections and their causal
application.
'''

import dataclasses
import warnings

import librosa
import numpy as np
import scipy.signal
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ContractError, ShapeError


_WINDOWS = {'hann': 'hann', 'rectangular': 'boxcar'}


@dataclasses.dataclass(frozen=True)
class StftParams:
    n_fft: int = 2048
    hop: int = 512
    window: str = 'hann'
    center: bool = True

    def __post_init__(self):
        if self.n_fft < 1 or self.n_fft & (self.n_fft - 1):
            raise ContractError(f'n_fft must be a power of two: {self.n_fft}')
        if not 0 < self.hop <= self.n_fft:
            raise ContractError(
                f'hop must be in (0, n_fft], got {self.hop}'
            )
        if self.window not in _WINDOWS:
            raise ContractError(f'unknown window {self.window!r}')

    @property
    def bins(self) -> int:
        return self.n_fft // 2 + 1

    def frame_count(self, length: int) -> int:
        padded = length + 2 * (self.n_fft // 2) if self.center else length
        return 1 + (padded - self.n_fft) // self.hop

    def window_samples(self) -> np.ndarray:
        return scipy.signal.get_window(_WINDOWS[self.window], self.n_fft,
                                       fftbins=True)


def stft(signal: np.ndarray, params: StftParams = StftParams()) -> np.ndarray:
    '''Complex spectrogram of shape (n_fft // 2 + 1, frames), complex64

    Frame f, bin k is sum_n w[n] x[f*hop + n - n_fft/2] e^{-2 pi i k n/N}
    with the signal reflect-padded by n_fft/2 on both sides.
    '''
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 1:
        raise ContractError(f'stft needs a non-empty mono signal, '
                            f'got shape {x.shape}')
    if params.center:
        x = np.pad(x, params.n_fft // 2, mode='reflect')
    if x.size < params.n_fft:
        raise ContractError(
            f'signal of {x.size} samples is shorter than n_fft'
        )
    frames = sliding_window_view(x, params.n_fft)[::params.hop]
    spectrum = np.fft.rfft(frames * params.window_samples(), axis=-1)
    return spectrum.T.astype(np.complex64)


@dataclasses.dataclass(frozen=True, eq=False)
class MelFilterbank:
    '''Triangular filters on the HTK mel scale

    `matrix` has shape (n_mels, n_fft // 2 + 1).
    '''
    matrix: np.ndarray
    center_frequencies: np.ndarray
    f_min: float
    f_max: float
    sample_rate: int

    @property
    def n_mels(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_fft(self) -> int:
        return 2 * (self.matrix.shape[1] - 1)


def hz_to_mel(frequency):
    return 2595.0 * np.log10(1.0 + np.asarray(frequency) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def mel_filterbank(n_fft: int, n_mels: int, sample_rate: int,
                   f_min: float = 0.0, f_max: float = None) -> MelFilterbank:
    '''HTK mel filterbank without area normalisation

    Filters narrower than the FFT bin spacing would otherwise be empty;
    those put unit weight on the bin nearest their centre so that every
    filter observes some energy.
    '''
    if f_max is None:
        f_max = sample_rate / 2.0
    if n_mels < 1:
        raise ContractError(f'n_mels must be >= 1, got {n_mels}')
    if not 0.0 <= f_min < f_max <= sample_rate / 2.0:
        raise ContractError(
            f'mel range [{f_min}, {f_max}] not within [0, {sample_rate / 2}]'
        )
    with warnings.catch_warnings():
        # empty filters are repaired below
        warnings.simplefilter('ignore', UserWarning)
        matrix = librosa.filters.mel(
            sr=sample_rate, n_fft=n_fft, n_mels=n_mels, fmin=f_min,
            fmax=f_max, htk=True, norm=None, dtype=np.float64,
        )
    edges = librosa.mel_frequencies(n_mels + 2, fmin=f_min, fmax=f_max,
                                    htk=True)
    centers = edges[1:-1]
    bin_frequencies = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    for row in np.flatnonzero(matrix.sum(axis=1) <= 0.0):
        nearest = np.argmin(np.abs(bin_frequencies - centers[row]))
        matrix[row, nearest] = 1.0
    return MelFilterbank(matrix, centers, float(f_min), float(f_max),
                         sample_rate)


def mel_spectrogram(signal: np.ndarray, stft_params: StftParams,
                    fb: MelFilterbank) -> np.ndarray:
    '''Mel-weighted STFT magnitudes, shape (n_mels, frames)'''
    if fb.matrix.shape[1] != stft_params.bins:
        raise ShapeError(
            f'filterbank has {fb.matrix.shape[1]} bins, STFT has '
            f'{stft_params.bins}'
        )
    magnitude = np.abs(stft(signal, stft_params)).astype(np.float64)
    return fb.matrix @ magnitude


@dataclasses.dataclass(frozen=True, eq=False)
class BiquadCascade:
    '''Second-order sections, rows (b0, b1, b2, 1, a1, a2)'''
    sections: np.ndarray

    def __post_init__(self):
        sections = np.array(self.sections, dtype=np.float64, copy=True)
        if sections.ndim != 2 or sections.shape[1] != 6:
            raise ShapeError(
                f'sections must have shape (n, 6), got {sections.shape}'
            )
        if not np.allclose(sections[:, 3], 1.0):
            raise ContractError('sections must be normalised to a0 = 1')
        object.__setattr__(self, 'sections', sections)

    @classmethod
    def identity(cls) -> 'BiquadCascade':
        return cls(np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]]))

    def poles(self) -> np.ndarray:
        return scipy.signal.sos2zpk(self.sections)[1]

    def is_stable(self) -> bool:
        poles = self.poles()
        return bool(poles.size == 0 or np.all(np.abs(poles) < 1.0))

    def frequency_response(self, frequencies, sample_rate: int) -> np.ndarray:
        '''Complex response at the given frequencies in Hz'''
        _, response = scipy.signal.sosfreqz(
            self.sections, worN=np.asarray(frequencies, dtype=np.float64),
            fs=sample_rate,
        )
        return response


def butterworth_lowpass(order: int, cutoff_hz: float,
                        sample_rate: int) -> BiquadCascade:
    '''Bilinear-transform Butterworth lowpass with pre-warped cutoff'''
    if order < 1:
        raise ContractError(f'filter order must be >= 1, got {order}')
    if not 0.0 < cutoff_hz < sample_rate / 2.0:
        raise ContractError(
            f'cutoff {cutoff_hz} Hz outside (0, {sample_rate / 2}) Hz'
        )
    sections = scipy.signal.butter(order, cutoff_hz, btype='lowpass',
                                   output='sos', fs=sample_rate)
    return BiquadCascade(sections)


def filter_apply(cascade: BiquadCascade, signal: np.ndarray) -> np.ndarray:
    '''Causal direct-form II transposed filtering from zero state'''
    if not cascade.is_stable():
        raise ContractError('filter cascade is unstable')
    return scipy.signal.sosfilt(cascade.sections,
                                np.asarray(signal, dtype=np.float64))
