'''Objective quality metrics

Scale-invariant SDR/SNR, multi-scale mel and STFT distances, and the
spatial cue errors (inter-channel phase and level differences). Metric
sets bundle them per content type for reports.
'''

import dataclasses
import functools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .audio import AudioBuffer, ChannelLayout
from .dsp import MelFilterbank, StftParams, mel_filterbank, mel_spectrogram, \
    stft
from .errors import (ContractError, LayoutError, ShapeError,
                     UndefinedMetricError)
from .spatial import downmix_51_to_stereo, front_rear_midside, mid_side


LOGGER = logging.getLogger(__name__)

SCORE_CAP_DB = 100.0
_SILENT_ENERGY = 1e-20

METRIC_SETS = ('speech', 'stereo', 'surround', 'downmix')

Signal = Union[np.ndarray, AudioBuffer]


@dataclasses.dataclass(frozen=True)
class SpatialMetricParams:
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 320
    eps: float = 1e-8
    active_bin_threshold: float = 1e-4
    sample_rate: int = 48000

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ContractError(f'eps must be > 0, got {self.eps}')
        if self.active_bin_threshold < 0.0:
            raise ContractError('active_bin_threshold must be >= 0')
        StftParams(self.n_fft, self.hop)


@dataclasses.dataclass(frozen=True)
class MultiScaleMelParams:
    scales: Tuple[Tuple[int, int, int], ...] = (
        (2048, 512, 128), (512, 128, 64), (128, 32, 16))
    eps: float = 1e-5
    sample_rate: int = 48000

    def __post_init__(self):
        if not self.scales:
            raise ContractError('at least one mel scale is required')
        if not self.eps > 0.0:
            raise ContractError(f'eps must be > 0, got {self.eps}')
        object.__setattr__(self, 'scales',
                           tuple(tuple(int(v) for v in s)
                                 for s in self.scales))

    @property
    def stft_scales(self) -> Tuple[Tuple[int, int], ...]:
        return tuple((n_fft, hop) for n_fft, hop, _ in self.scales)


def _mono_pair(reference, estimate) -> Tuple[np.ndarray, np.ndarray]:
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.ndim != 1 or reference.shape != estimate.shape:
        raise ShapeError(
            f'reference {reference.shape} and estimate {estimate.shape} '
            'must be equal-length mono signals'
        )
    return reference, estimate


def _scale_invariant_ratio(reference: np.ndarray,
                           estimate: np.ndarray) -> float:
    energy = float(np.dot(reference, reference))
    if energy <= _SILENT_ENERGY:
        raise UndefinedMetricError('reference signal carries no energy')
    target = np.dot(estimate, reference) / energy * reference
    target_energy = float(np.dot(target, target))
    if target_energy <= 0.0:
        return -SCORE_CAP_DB
    error = estimate - target
    error_energy = float(np.dot(error, error))
    if error_energy < _SILENT_ENERGY:
        return SCORE_CAP_DB
    ratio = 10.0 * math.log10(target_energy / error_energy)
    return float(np.clip(ratio, -SCORE_CAP_DB, SCORE_CAP_DB))


def si_snr(reference, estimate) -> float:
    '''Scale-invariant SNR in dB of mean-removed signals'''
    reference, estimate = _mono_pair(reference, estimate)
    return _scale_invariant_ratio(reference - reference.mean(),
                                  estimate - estimate.mean())


def si_sdr(reference, estimate) -> float:
    '''Scale-invariant SDR in dB; signals used as given'''
    reference, estimate = _mono_pair(reference, estimate)
    return _scale_invariant_ratio(reference, estimate)


def _channels(signal: Signal) -> np.ndarray:
    if isinstance(signal, AudioBuffer):
        signal = signal.samples
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim == 1:
        signal = signal[None, :]
    if signal.ndim != 2:
        raise ShapeError(f'expected (channels, samples), got {signal.shape}')
    return signal


def _channel_pairs(reference: Signal, estimate: Signal):
    reference = _channels(reference)
    estimate = _channels(estimate)
    if reference.shape != estimate.shape:
        raise ShapeError(
            f'reference {reference.shape} and estimate {estimate.shape} '
            'differ in shape'
        )
    return reference, estimate


@functools.lru_cache(maxsize=32)
def _filterbank(n_fft: int, n_mels: int, sample_rate: int) -> MelFilterbank:
    return mel_filterbank(n_fft, n_mels, sample_rate)


def multiscale_mel_distance(reference: Signal, estimate: Signal,
                            params: MultiScaleMelParams = MultiScaleMelParams()
                            ) -> float:
    '''Mean over scales and channels of the L1 log10-mel difference'''
    reference, estimate = _channel_pairs(reference, estimate)
    per_channel = []
    for ref, est in zip(reference, estimate):
        per_scale = []
        for n_fft, hop, n_mels in params.scales:
            stft_params = StftParams(n_fft, hop)
            fb = _filterbank(n_fft, n_mels, params.sample_rate)
            ref_mel = mel_spectrogram(ref, stft_params, fb)
            est_mel = mel_spectrogram(est, stft_params, fb)
            per_scale.append(np.mean(np.abs(
                np.log10(ref_mel + params.eps)
                - np.log10(est_mel + params.eps))))
        per_channel.append(np.mean(per_scale))
    return float(np.mean(per_channel))


def stft_distance(reference: Signal, estimate: Signal,
                  scales: Sequence[Tuple[int, int]] =
                  MultiScaleMelParams().stft_scales,
                  eps: float = 1e-5) -> float:
    '''Mean over scales and channels of the L1 log10-magnitude difference'''
    if not scales:
        raise ContractError('at least one STFT scale is required')
    reference, estimate = _channel_pairs(reference, estimate)
    per_channel = []
    for ref, est in zip(reference, estimate):
        per_scale = []
        for n_fft, hop in scales:
            params = StftParams(int(n_fft), int(hop))
            ref_mag = np.abs(stft(ref, params)).astype(np.float64)
            est_mag = np.abs(stft(est, params)).astype(np.float64)
            per_scale.append(np.mean(np.abs(
                np.log10(ref_mag + eps) - np.log10(est_mag + eps))))
        per_channel.append(np.mean(per_scale))
    return float(np.mean(per_channel))


def wrap_phase(phase):
    '''Map radians into (-pi, pi]'''
    return np.pi - np.mod(np.pi - np.asarray(phase, dtype=np.float64),
                          2.0 * np.pi)


def _four_signals(ref_pair, est_pair) -> List[np.ndarray]:
    signals = [np.asarray(s, dtype=np.float64)
               for s in (*ref_pair, *est_pair)]
    if len(signals) != 4:
        raise ContractError('spatial metrics need two pairs of signals')
    if len({s.shape for s in signals}) != 1 or signals[0].ndim != 1:
        raise ShapeError('all four signals must be equal-length mono')
    return signals


def delta_ipd(ref_pair, est_pair,
              params: SpatialMetricParams = SpatialMetricParams()) -> float:
    '''Mean absolute wrapped IPD error over active reference bins

    A bin is active when both reference channels exceed
    `active_bin_threshold` times the reference peak magnitude. Without
    active bins the error is 0.
    '''
    stft_params = StftParams(params.n_fft, params.hop)
    ref_l, ref_r, est_l, est_r = (stft(s, stft_params) for s in
                                  _four_signals(ref_pair, est_pair))
    mag_l = np.abs(ref_l)
    mag_r = np.abs(ref_r)
    peak = max(float(mag_l.max()), float(mag_r.max()))
    gate = params.active_bin_threshold * peak
    active = (mag_l > gate) & (mag_r > gate)
    if peak <= 0.0 or not np.any(active):
        return 0.0
    ipd_ref = wrap_phase(np.angle(ref_l) - np.angle(ref_r))
    ipd_est = wrap_phase(np.angle(est_l) - np.angle(est_r))
    return float(np.mean(np.abs(wrap_phase(ipd_ref - ipd_est))[active]))


def delta_ild(ref_pair, est_pair,
              params: SpatialMetricParams = SpatialMetricParams()) -> float:
    '''Mean absolute ILD error in dB on mel magnitudes'''
    stft_params = StftParams(params.n_fft, params.hop)
    fb = _filterbank(params.n_fft, params.n_mels, params.sample_rate)
    ref_l, ref_r, est_l, est_r = (mel_spectrogram(s, stft_params, fb) for s in
                                  _four_signals(ref_pair, est_pair))

    def ild(left, right):
        return 20.0 * np.log10((left + params.eps) / (right + params.eps))

    return float(np.mean(np.abs(ild(ref_l, ref_r) - ild(est_l, est_r))))


def compatibility_distances(reference: AudioBuffer, estimate: AudioBuffer,
                            params: MultiScaleMelParams = MultiScaleMelParams()
                            ) -> Dict[str, float]:
    '''Mel distances on the signals a downstream consumer derives

    Stereo is scored on mid and side. 5.1 is scored on front and rear
    mid/side and on the stereo downmix.
    '''
    if reference.layout != estimate.layout:
        raise LayoutError(
            f'cannot compare {reference.layout.label} with '
            f'{estimate.layout.label}'
        )
    if reference.layout == ChannelLayout.STEREO:
        names = ('mid', 'side')
        pairs = zip(mid_side(reference), mid_side(estimate))
    elif reference.layout == ChannelLayout.SURROUND51:
        names = ('front_mid', 'front_side', 'rear_mid', 'rear_side')
        pairs = zip(front_rear_midside(reference),
                    front_rear_midside(estimate))
    else:
        raise LayoutError('compatibility distances need stereo or 5.1 input')
    distances = {name: multiscale_mel_distance(ref, est, params)
                 for name, (ref, est) in zip(names, pairs)}
    if reference.layout == ChannelLayout.SURROUND51:
        distances['downmix'] = multiscale_mel_distance(
            downmix_51_to_stereo(reference), downmix_51_to_stereo(estimate),
            params)
    return distances


def align_lengths(reference: AudioBuffer, estimate: AudioBuffer,
                  tolerance: int = 1920) -> Tuple[AudioBuffer, AudioBuffer]:
    '''Trim the longer buffer when lengths differ by at most `tolerance`'''
    difference = abs(reference.frames - estimate.frames)
    if difference == 0:
        return reference, estimate
    if difference > tolerance:
        raise ShapeError(
            f'reference has {reference.frames} frames, estimate '
            f'{estimate.frames}; more than {tolerance} apart'
        )
    frames = min(reference.frames, estimate.frames)
    LOGGER.warning('trimming reference and estimate to %d frames '
                   '(they differed by %d)', frames, difference)

    def trim(buffer):
        return AudioBuffer(buffer.sample_rate, buffer.layout,
                           buffer.samples[:, :frames])

    return trim(reference), trim(estimate)


def _record(metric: str, value: Optional[float], group: str,
            params: Dict[str, Any], **extra) -> Dict[str, Any]:
    record = {'metric': metric, 'group': group, 'value': value,
              'params': params}
    record.update(extra)
    return record


def _scale_invariant(fn, references: np.ndarray, estimates: np.ndarray):
    '''Channel-averaged SI metric; None (with reason) when undefined'''
    try:
        return float(np.mean([fn(r, e)
                              for r, e in zip(references, estimates)])), {}
    except UndefinedMetricError as e:
        return None, {'note': str(e)}


def _channel_metrics(references: np.ndarray, estimates: np.ndarray,
                     group: str, mel_params: MultiScaleMelParams,
                     **extra) -> List[Dict[str, Any]]:
    mel_entry = dataclasses.asdict(mel_params)
    stft_entry = {'scales': mel_params.stft_scales, 'eps': mel_params.eps}
    records = []
    for name, fn in (('si_sdr', si_sdr), ('si_snr', si_snr)):
        value, note = _scale_invariant(fn, references, estimates)
        records.append(_record(name, value, group, {}, **note, **extra))
    records.append(_record(
        'mel', multiscale_mel_distance(references, estimates, mel_params),
        group, mel_entry, **extra))
    records.append(_record(
        'stft', stft_distance(references, estimates,
                              mel_params.stft_scales, mel_params.eps),
        group, stft_entry, **extra))
    return records


def _pair_metrics(references: np.ndarray, estimates: np.ndarray, group: str,
                  mel_params: MultiScaleMelParams,
                  spatial_params: SpatialMetricParams
                  ) -> List[Dict[str, Any]]:
    records = _channel_metrics(references, estimates, group, mel_params)
    spatial_entry = dataclasses.asdict(spatial_params)
    records.append(_record(
        'delta_ipd', delta_ipd(references, estimates, spatial_params),
        group, spatial_entry))
    records.append(_record(
        'delta_ild', delta_ild(references, estimates, spatial_params),
        group, spatial_entry))
    return records


_SET_LAYOUTS = {
    'speech': ChannelLayout.MONO,
    'stereo': ChannelLayout.STEREO,
    'surround': ChannelLayout.SURROUND51,
    'downmix': ChannelLayout.SURROUND51,
}


def metric_report(reference: AudioBuffer, estimate: AudioBuffer,
                  metric_set: str,
                  mel_params: MultiScaleMelParams = MultiScaleMelParams(),
                  spatial_params: SpatialMetricParams = SpatialMetricParams()
                  ) -> List[Dict[str, Any]]:
    '''One record per metric, grouped as the content type requires

    speech    si_sdr, si_snr, mel, stft and pesq (not available)
    stereo    the speech metrics plus delta_ipd and delta_ild
    surround  stereo metrics on the front and rear pairs, the speech
              metrics on the centre and on the LFE, which is flagged
              as low reliability
    downmix   stereo metrics on the 5.1 to stereo downmixes
    '''
    if metric_set not in _SET_LAYOUTS:
        raise ContractError(
            f'unknown metric set {metric_set!r}, choose from '
            f'{", ".join(METRIC_SETS)}'
        )
    expected = _SET_LAYOUTS[metric_set]
    for buffer in (reference, estimate):
        if buffer.layout != expected:
            raise LayoutError(
                f'{metric_set} metrics need {expected.label} input, got '
                f'{buffer.layout.label}'
            )
    if reference.frames != estimate.frames:
        raise ShapeError(
            f'reference has {reference.frames} frames, estimate '
            f'{estimate.frames}'
        )
    ref = reference.samples
    est = estimate.samples
    if metric_set == 'speech':
        records = _channel_metrics(ref, est, 'mono', mel_params)
        records.append(_record('pesq', 'n/a', 'mono', {},
                               note='PESQ is not implemented'))
        return records
    if metric_set == 'stereo':
        return _pair_metrics(ref, est, 'stereo', mel_params, spatial_params)
    if metric_set == 'downmix':
        return _pair_metrics(downmix_51_to_stereo(reference).samples,
                             downmix_51_to_stereo(estimate).samples,
                             'downmix', mel_params, spatial_params)
    names = ChannelLayout.SURROUND51.channel_names

    def rows(*channels):
        index = [names.index(c) for c in channels]
        return ref[index], est[index]

    records = _pair_metrics(*rows('L', 'R'), 'front', mel_params,
                            spatial_params)
    records += _channel_metrics(*rows('C'), 'center', mel_params)
    records += _pair_metrics(*rows('Ls', 'Rs'), 'rear', mel_params,
                             spatial_params)
    records += _channel_metrics(*rows('LFE'), 'lfe', mel_params,
                                low_reliability=True)
    return records
