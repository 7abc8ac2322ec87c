import dataclasses
import os
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from vcnac.audio import AudioBuffer, ChannelLayout
from vcnac.errors import ContractError, LayoutError, SampleRateError, \
    ShapeError
from vcnac.simulation import SurroundSimParams, draw_surround_mix, \
    simulate_chunks, simulate_surround


SR = 48000

# every random choice collapsed onto a single value
PINNED = SurroundSimParams(
    p_center=1.0,
    center_gain_range=(0.5, 0.5),
    front_gain_range=(1.0, 1.0),
    p_rear=0.0,
    bleed_range=(0.0, 0.0),
    lfe_cutoff_range_hz=(100.0, 100.0),
    lfe_gain_range=(1.0, 1.0),
)


def tracks(frames=SR, seed=0):
    rng = np.random.default_rng(seed)
    speech = AudioBuffer(SR, ChannelLayout.MONO,
                         0.3 * rng.standard_normal((1, frames)))
    primary = AudioBuffer(SR, ChannelLayout.STEREO,
                          0.3 * rng.standard_normal((2, frames)))
    secondary = AudioBuffer(SR, ChannelLayout.STEREO,
                            0.3 * rng.standard_normal((2, frames)))
    return speech, primary, secondary


class TestSurroundSimParams(unittest.TestCase):

    def test_defaults(self):
        params = SurroundSimParams()
        self.assertEqual(params.p_center, 0.7)
        self.assertEqual(params.lfe_cutoff_range_hz, (80.0, 120.0))
        self.assertEqual(params.lfe_filter_order, 4)

    def test_validation(self):
        with self.assertRaises(ContractError):
            SurroundSimParams(p_center=1.5)
        with self.assertRaises(ContractError):
            SurroundSimParams(rear_gain_range=(0.8, 0.3))
        with self.assertRaises(ContractError):
            SurroundSimParams(lfe_cutoff_range_hz=(0.0, 100.0))
        with self.assertRaises(ContractError):
            SurroundSimParams(lfe_filter_order=0)
        with self.assertRaises(ContractError):
            SurroundSimParams(rng_seed=-1)

    def test_file_roundtrip(self):
        params = dataclasses.replace(PINNED, rng_seed=1234)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'sim.cfg')
            params.to_file(path)
            self.assertEqual(SurroundSimParams.from_file(path), params)


class TestDrawSurroundMix(unittest.TestCase):

    def test_ranges(self):
        params = SurroundSimParams()
        for seed in range(200):
            mix = draw_surround_mix(dataclasses.replace(params,
                                                        rng_seed=seed))
            self.assertTrue(80.0 <= mix.lfe_cutoff_hz <= 120.0)
            self.assertTrue(0.4 <= mix.center_gain <= 1.0)
            self.assertTrue(all(0.5 <= g <= 1.0 for g in mix.front_gains))
            self.assertTrue(all(0.3 <= g <= 0.8 for g in mix.rear_gains))
            bleed = mix.bleed_matrix()
            self.assertEqual(bleed.shape, (5, 5))
            npt.assert_array_equal(np.diag(bleed), 0.0)
            self.assertTrue(np.all((bleed >= 0.0) & (bleed <= 0.1)))

    def test_activity_rates(self):
        params = SurroundSimParams()
        mixes = [draw_surround_mix(dataclasses.replace(params, rng_seed=s))
                 for s in range(2000)]
        center = np.mean([m.center_active for m in mixes])
        rear = np.mean([m.rear_active for m in mixes])
        self.assertAlmostEqual(center, 0.7, delta=0.05)
        self.assertAlmostEqual(rear, 0.8, delta=0.05)

    def test_seeded(self):
        params = SurroundSimParams(rng_seed=7)
        self.assertEqual(draw_surround_mix(params), draw_surround_mix(params))
        other = dataclasses.replace(params, rng_seed=8)
        self.assertNotEqual(draw_surround_mix(params),
                            draw_surround_mix(other))

    def test_text(self):
        text = draw_surround_mix(PINNED).to_text()
        self.assertIn('center_active=true\n', text)
        self.assertIn('rear_active=false\n', text)
        self.assertIn('bleed.L_to_R=', text)
        self.assertNotIn('bleed.L_to_L=', text)


class TestSimulateSurround(unittest.TestCase):

    def setUp(self):
        self.speech, self.primary, self.secondary = tracks()

    def test_deterministic(self):
        params = SurroundSimParams(rng_seed=3)
        first = simulate_surround(self.speech, self.primary, self.secondary,
                                  params)
        second = simulate_surround(self.speech, self.primary, self.secondary,
                                   params)
        self.assertEqual(first, second)
        self.assertEqual(first.layout, ChannelLayout.SURROUND51)
        self.assertEqual(first.frames, SR)

    def test_pinned_mix(self):
        out = simulate_surround(self.speech, self.primary, self.secondary,
                                PINNED)
        npt.assert_array_equal(out.channel('C'), 0.5 * self.speech.samples[0])
        npt.assert_array_equal(out.channel('L'), self.primary.samples[0])
        npt.assert_array_equal(out.channel('R'), self.primary.samples[1])
        npt.assert_array_equal(out.channel('Ls'), 0.0)
        npt.assert_array_equal(out.channel('Rs'), 0.0)

    def test_silent_center(self):
        params = dataclasses.replace(PINNED, p_center=0.0)
        out = simulate_surround(self.speech, self.primary, self.secondary,
                                params)
        npt.assert_array_equal(out.channel('C'), 0.0)

    def test_center_ignores_music_without_bleed(self):
        _, other_primary, other_secondary = tracks(seed=5)
        first = simulate_surround(self.speech, self.primary, self.secondary,
                                  PINNED)
        second = simulate_surround(self.speech, other_primary,
                                   other_secondary, PINNED)
        npt.assert_array_equal(first.channel('C'), second.channel('C'))

    def test_bleed_leaks_into_active_channels(self):
        params = dataclasses.replace(PINNED, bleed_range=(0.05, 0.05))
        silent = AudioBuffer.silence(SR, ChannelLayout.MONO, SR)
        out = simulate_surround(silent, self.primary, self.secondary, params)
        left = self.primary.samples[0].astype(np.float64)
        right = self.primary.samples[1].astype(np.float64)
        npt.assert_allclose(out.channel('C'), 0.05 * (left + right),
                            atol=1e-6)
        npt.assert_allclose(out.channel('L'), left + 0.05 * right,
                            atol=1e-6)

    def test_inactive_channels_stay_silent(self):
        params = SurroundSimParams(p_center=0.0, p_rear=0.0, rng_seed=1)
        mix = draw_surround_mix(params)
        self.assertGreater(mix.bleed_matrix()[0].sum(), 0.0)
        out = simulate_surround(self.speech, self.primary, self.secondary,
                                params)
        npt.assert_array_equal(out.channel('C'), 0.0)
        npt.assert_array_equal(out.channel('Ls'), 0.0)
        npt.assert_array_equal(out.channel('Rs'), 0.0)
        self.assertGreater(np.abs(out.channel('L')).max(), 0.0)

    def test_inactive_rows_of_bleed_matrix(self):
        params = dataclasses.replace(PINNED, p_center=0.0,
                                     bleed_range=(0.05, 0.05))
        matrix = draw_surround_mix(params).bleed_matrix()
        npt.assert_array_equal(matrix[2:], 0.0)
        npt.assert_array_equal(matrix[0], [0.0, 0.05, 0.05, 0.05, 0.05])

    def test_lfe_is_lowpassed(self):
        t = np.arange(SR) / SR
        tone = 0.5 * np.sin(2 * np.pi * 1000.0 * t)
        primary = AudioBuffer(SR, ChannelLayout.STEREO, np.stack([tone, tone]))
        silent_mono = AudioBuffer.silence(SR, ChannelLayout.MONO, SR)
        silent_stereo = AudioBuffer.silence(SR, ChannelLayout.STEREO, SR)
        params = dataclasses.replace(PINNED, p_center=0.0)
        out = simulate_surround(silent_mono, primary, silent_stereo, params)
        settled = slice(SR // 10, None)
        source_rms = np.sqrt(np.mean((2 * tone[settled]) ** 2))
        lfe_rms = np.sqrt(np.mean(
            out.channel('LFE')[settled].astype(np.float64) ** 2))
        self.assertGreater(20 * np.log10(source_rms / lfe_rms), 20.0)

    def test_lfe_passes_low_frequencies(self):
        t = np.arange(SR) / SR
        tone = 0.5 * np.sin(2 * np.pi * 20.0 * t)
        primary = AudioBuffer(SR, ChannelLayout.STEREO, np.stack([tone, tone]))
        silent_mono = AudioBuffer.silence(SR, ChannelLayout.MONO, SR)
        silent_stereo = AudioBuffer.silence(SR, ChannelLayout.STEREO, SR)
        params = dataclasses.replace(PINNED, p_center=0.0)
        out = simulate_surround(silent_mono, primary, silent_stereo, params)
        settled = slice(SR // 2, None)
        source_rms = np.sqrt(np.mean((2 * tone[settled]) ** 2))
        lfe_rms = np.sqrt(np.mean(
            out.channel('LFE')[settled].astype(np.float64) ** 2))
        self.assertAlmostEqual(lfe_rms / source_rms, 1.0, delta=0.05)

    def test_input_checks(self):
        with self.assertRaises(LayoutError):
            simulate_surround(self.speech, self.speech, self.secondary)
        with self.assertRaises(LayoutError):
            simulate_surround(self.primary, self.primary, self.secondary)
        resampled = AudioBuffer(44100, ChannelLayout.STEREO,
                                self.primary.samples)
        with self.assertRaises(SampleRateError):
            simulate_surround(self.speech, resampled, self.secondary)
        short = AudioBuffer(SR, ChannelLayout.STEREO,
                            self.primary.samples[:, :100])
        with self.assertRaises(ShapeError):
            simulate_surround(self.speech, short, self.secondary)


class TestSimulateChunks(unittest.TestCase):

    def test_chunks(self):
        speech, primary, secondary = tracks(frames=2 * 61440 + 100)
        params = SurroundSimParams(rng_seed=11)
        examples = simulate_chunks(speech, primary, secondary, params)
        self.assertEqual(len(examples), 2)
        for buffer, _ in examples:
            self.assertEqual(buffer.frames, 61440)
            self.assertEqual(buffer.layout, ChannelLayout.SURROUND51)
        self.assertNotEqual(examples[0][1], examples[1][1])
        again = simulate_chunks(speech, primary, secondary, params)
        self.assertEqual([m for _, m in examples], [m for _, m in again])

    def test_shortest_track_limits_chunks(self):
        speech, primary, secondary = tracks(frames=3 * 48000)
        short = AudioBuffer(SR, ChannelLayout.MONO, speech.samples[:, :48000])
        examples = simulate_chunks(short, primary, secondary,
                                   SurroundSimParams(), chunk_seconds=1.0)
        self.assertEqual(len(examples), 1)
