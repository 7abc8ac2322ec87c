'''Synthetic 5.1 content from a mono speech and two stereo tracks

Speech feeds the centre, the primary stereo track the front pair and
the secondary track the rear pair. Centre and rears are switched on at
random, all gains are uniform draws, every active main channel picks up a
little of every other one, and the LFE is a Butterworth-lowpassed sum
of the main channels.
'''

import dataclasses
import logging
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from . import config as kv
from .audio import AudioBuffer, ChannelLayout, chunk
from .dsp import butterworth_lowpass, filter_apply
from .errors import ContractError, LayoutError, SampleRateError, ShapeError


LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]

Range = Tuple[float, float]

# row/column order of the bleed matrix
MAIN_CHANNELS = ('L', 'R', 'C', 'Ls', 'Rs')

DEFAULT_CHUNK_SECONDS = 1.28


@dataclasses.dataclass(frozen=True)
class SurroundSimParams:
    p_center: float = 0.7
    center_gain_range: Range = (0.4, 1.0)
    front_gain_range: Range = (0.5, 1.0)
    p_rear: float = 0.8
    rear_gain_range: Range = (0.3, 0.8)
    bleed_range: Range = (0.0, 0.1)
    lfe_cutoff_range_hz: Range = (80.0, 120.0)
    lfe_gain_range: Range = (0.5, 1.0)
    lfe_filter_order: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        for name in ('p_center', 'p_rear'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f'{name} must be in [0, 1], got {value}')
        for field in dataclasses.fields(self):
            if not field.name.endswith('_range') \
                    and not field.name.endswith('_range_hz'):
                continue
            value = tuple(float(v) for v in getattr(self, field.name))
            if len(value) != 2 or not value[0] <= value[1]:
                raise ContractError(
                    f'{field.name} must be a (low, high) pair with '
                    f'low <= high, got {value}'
                )
            object.__setattr__(self, field.name, value)
        if self.lfe_cutoff_range_hz[0] <= 0.0:
            raise ContractError('LFE cutoffs must be positive')
        if self.lfe_filter_order < 1:
            raise ContractError('lfe_filter_order must be >= 1')
        if not 0 <= self.rng_seed < 1 << 64:
            raise ContractError('rng_seed must be a 64-bit unsigned integer')

    def to_file(self, path: PathLike) -> None:
        kv.write_key_value(kv.to_entries(self), path)

    @classmethod
    def from_file(cls, path: PathLike) -> 'SurroundSimParams':
        return kv.from_entries(cls, kv.read_key_value(path))


@dataclasses.dataclass(frozen=True)
class SurroundMix:
    '''Every random decision of one simulated example'''
    center_active: bool
    center_gain: float
    front_gains: Tuple[float, float]
    rear_active: bool
    rear_gains: Tuple[float, float]
    bleed: Tuple[Tuple[float, ...], ...]
    lfe_cutoff_hz: float
    lfe_gain: float

    def active(self) -> Tuple[bool, ...]:
        '''Activity per main channel, in MAIN_CHANNELS order'''
        return (True, True, self.center_active, self.rear_active,
                self.rear_active)

    def bleed_matrix(self) -> np.ndarray:
        '''Drawn coefficients with the rows of inactive targets zeroed

        An inactive channel stays silent: it neither leaks (its source
        is zero) nor picks up leakage from the others.
        '''
        matrix = np.array(self.bleed, dtype=np.float64)
        matrix[~np.array(self.active())] = 0.0
        return matrix

    def entries(self) -> Dict[str, Any]:
        entries = {
            'center_active': self.center_active,
            'center_gain': self.center_gain,
            'front_gains': self.front_gains,
            'rear_active': self.rear_active,
            'rear_gains': self.rear_gains,
            'lfe_cutoff_hz': self.lfe_cutoff_hz,
            'lfe_gain': self.lfe_gain,
        }
        for i, target in enumerate(MAIN_CHANNELS):
            for j, source in enumerate(MAIN_CHANNELS):
                if i != j:
                    entries[f'bleed.{source}_to_{target}'] = self.bleed[i][j]
        return entries

    def to_text(self) -> str:
        return kv.format_key_value(self.entries())


def draw_surround_mix(params: SurroundSimParams) -> SurroundMix:
    '''Draw one mix from a generator seeded with params.rng_seed

    Draws happen in a fixed order whatever the outcome of the activity
    flags, so changing one probability never shifts the other draws.
    '''
    rng = np.random.default_rng(params.rng_seed)
    center_active = bool(rng.random() < params.p_center)
    center_gain = float(rng.uniform(*params.center_gain_range))
    front_gains = tuple(float(g) for g in
                        rng.uniform(*params.front_gain_range, size=2))
    rear_active = bool(rng.random() < params.p_rear)
    rear_gains = tuple(float(g) for g in
                       rng.uniform(*params.rear_gain_range, size=2))
    count = len(MAIN_CHANNELS)
    bleed = rng.uniform(*params.bleed_range, size=(count, count))
    np.fill_diagonal(bleed, 0.0)
    cutoff = float(rng.uniform(*params.lfe_cutoff_range_hz))
    lfe_gain = float(rng.uniform(*params.lfe_gain_range))
    return SurroundMix(
        center_active=center_active,
        center_gain=center_gain,
        front_gains=front_gains,
        rear_active=rear_active,
        rear_gains=rear_gains,
        bleed=tuple(tuple(float(v) for v in row) for row in bleed),
        lfe_cutoff_hz=cutoff,
        lfe_gain=lfe_gain,
    )


def _check_inputs(speech: AudioBuffer, primary: AudioBuffer,
                  secondary: AudioBuffer):
    expected = ((speech, ChannelLayout.MONO, 'speech'),
                (primary, ChannelLayout.STEREO, 'primary'),
                (secondary, ChannelLayout.STEREO, 'secondary'))
    for buffer, layout, name in expected:
        if buffer.layout != layout:
            raise LayoutError(
                f'{name} track must be {layout.label}, got '
                f'{buffer.layout.label}'
            )
    rates = {b.sample_rate for b in (speech, primary, secondary)}
    if len(rates) != 1:
        raise SampleRateError(f'tracks disagree on sample rate: {rates}')
    lengths = {b.frames for b in (speech, primary, secondary)}
    if len(lengths) != 1:
        raise ShapeError(f'tracks disagree on length: {sorted(lengths)}')


def render_surround(speech: AudioBuffer, primary: AudioBuffer,
                    secondary: AudioBuffer, mix: SurroundMix,
                    lfe_filter_order: int = 4) -> AudioBuffer:
    '''Apply a drawn mix to the three tracks; no clipping'''
    _check_inputs(speech, primary, secondary)
    sample_rate = speech.sample_rate
    frames = speech.frames
    pre = np.zeros((len(MAIN_CHANNELS), frames), dtype=np.float64)
    pre[0] = mix.front_gains[0] * primary.samples[0].astype(np.float64)
    pre[1] = mix.front_gains[1] * primary.samples[1].astype(np.float64)
    if mix.center_active:
        pre[2] = mix.center_gain * speech.samples[0].astype(np.float64)
    if mix.rear_active:
        pre[3] = mix.rear_gains[0] * secondary.samples[0].astype(np.float64)
        pre[4] = mix.rear_gains[1] * secondary.samples[1].astype(np.float64)

    post = pre + mix.bleed_matrix() @ pre
    # inactive channels are zero, so this sums the active sources
    lfe_source = pre.sum(axis=0)
    if frames:
        lowpass = butterworth_lowpass(lfe_filter_order, mix.lfe_cutoff_hz,
                                      sample_rate)
        lfe = mix.lfe_gain * filter_apply(lowpass, lfe_source)
    else:
        lfe = lfe_source
    L, R, C, Ls, Rs = post
    return AudioBuffer(sample_rate, ChannelLayout.SURROUND51,
                       np.stack([L, R, C, lfe, Ls, Rs]))


def simulate_surround(speech: AudioBuffer, primary: AudioBuffer,
                      secondary: AudioBuffer,
                      params: SurroundSimParams = SurroundSimParams()
                      ) -> AudioBuffer:
    '''Deterministic in (inputs, params)'''
    mix = draw_surround_mix(params)
    return render_surround(speech, primary, secondary, mix,
                           params.lfe_filter_order)


def simulate_chunks(speech: AudioBuffer, primary: AudioBuffer,
                    secondary: AudioBuffer, params: SurroundSimParams,
                    chunk_seconds: float = DEFAULT_CHUNK_SECONDS
                    ) -> List[Tuple[AudioBuffer, SurroundMix]]:
    '''One simulated example per aligned chunk of the three tracks

    Chunk i is mixed with a seed spawned from params.rng_seed, so the
    examples are independent of each other yet reproducible.
    '''
    pieces = [chunk(b, chunk_seconds) for b in (speech, primary, secondary)]
    count = min(len(p) for p in pieces)
    if count < max(len(p) for p in pieces):
        LOGGER.info('tracks differ in length, using the first %d chunks',
                    count)
    children = np.random.SeedSequence(params.rng_seed).spawn(count)
    examples = []
    for i, child in enumerate(children):
        seed = int(child.generate_state(1, dtype=np.uint64)[0])
        chunk_params = dataclasses.replace(params, rng_seed=seed)
        mix = draw_surround_mix(chunk_params)
        rendered = render_surround(pieces[0][i], pieces[1][i], pieces[2][i],
                                   mix, params.lfe_filter_order)
        examples.append((rendered, mix))
    return examples
