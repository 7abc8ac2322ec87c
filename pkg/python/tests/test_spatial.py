import math
import unittest

import numpy as np
import numpy.testing as npt
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vcnac.audio import AudioBuffer, ChannelLayout
from vcnac.errors import ContractError, LayoutError
from vcnac.spatial import DownmixCoeffs, downmix_51_to_stereo, \
    front_rear_midside, inverse_mid_side, mid_side


def stereo(left, right):
    return AudioBuffer(48000, ChannelLayout.STEREO, [left, right])


def surround(**channels):
    frames = len(next(iter(channels.values())))
    samples = np.zeros((6, frames), np.float32)
    for name, values in channels.items():
        samples[ChannelLayout.SURROUND51.channel_names.index(name)] = values
    return AudioBuffer(48000, ChannelLayout.SURROUND51, samples)


class TestMidSide(unittest.TestCase):

    def test_identical_channels(self):
        mid, side = mid_side(stereo([1, 0], [1, 0]))
        npt.assert_array_equal(mid, [2, 0])
        npt.assert_array_equal(side, [0, 0])

    def test_anti_phase(self):
        mid, side = mid_side(stereo([1], [-1]))
        npt.assert_array_equal(mid, [0])
        npt.assert_array_equal(side, [2])

    def test_requires_stereo(self):
        with self.assertRaises(LayoutError):
            mid_side(AudioBuffer(48000, ChannelLayout.MONO, [[1.0]]))

    def test_inverse(self):
        npt.assert_array_equal(inverse_mid_side([2.0], [0.0]).samples,
                               [[1.0], [1.0]])
        self.assertFalse(np.any(inverse_mid_side([0.0], [0.0]).samples))

    def test_inverse_length_mismatch(self):
        with self.assertRaises(ContractError):
            inverse_mid_side([1.0, 2.0], [1.0])

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(np.float32, st.tuples(st.just(2),
                                            st.integers(1, 200)),
                      elements=st.floats(-1, 1, width=32)))
    def test_roundtrip(self, samples):
        buffer = AudioBuffer(48000, ChannelLayout.STEREO, samples)
        restored = inverse_mid_side(*mid_side(buffer))
        npt.assert_allclose(restored.samples, buffer.samples, atol=1e-7)


class TestFrontRearMidSide(unittest.TestCase):

    def test_equal_channels_have_no_side(self):
        x = [0.3, -0.2]
        _, front_side, _, rear_side = front_rear_midside(
            surround(L=x, R=x, Ls=x, Rs=x))
        npt.assert_array_equal(front_side, [0, 0])
        npt.assert_array_equal(rear_side, [0, 0])

    def test_single_rear_channel(self):
        fm, fs, rm, rs = front_rear_midside(surround(Ls=[1.0]))
        npt.assert_array_equal(rm, [1.0])
        npt.assert_array_equal(rs, [1.0])
        npt.assert_array_equal(fm, [0.0])
        npt.assert_array_equal(fs, [0.0])

    def test_energy(self):
        rng = np.random.default_rng(1)
        left, right = rng.standard_normal((2, 100)).astype(np.float32)
        fm, fs, _, _ = front_rear_midside(surround(L=left, R=right))
        npt.assert_allclose(
            np.sum(fm ** 2) + np.sum(fs ** 2),
            2 * (np.sum(left.astype(float) ** 2)
                 + np.sum(right.astype(float) ** 2)),
            rtol=1e-12)

    def test_requires_surround(self):
        with self.assertRaises(LayoutError):
            front_rear_midside(stereo([0], [0]))


class TestDownmix(unittest.TestCase):

    def test_silence(self):
        out = downmix_51_to_stereo(surround(L=np.zeros(8)))
        self.assertIs(out.layout, ChannelLayout.STEREO)
        self.assertFalse(np.any(out.samples))

    def test_center_only(self):
        out = downmix_51_to_stereo(surround(C=[1.0]))
        npt.assert_allclose(out.samples, [[math.sqrt(0.5)],
                                          [math.sqrt(0.5)]], atol=1e-7)

    def test_front_passes_through(self):
        out = downmix_51_to_stereo(surround(L=[1.0]))
        npt.assert_array_equal(out.samples, [[1.0], [0.0]])

    def test_lfe_excluded_by_default(self):
        out = downmix_51_to_stereo(surround(LFE=[1.0]))
        npt.assert_array_equal(out.samples, [[0.0], [0.0]])
        out = downmix_51_to_stereo(surround(LFE=[1.0]),
                                   DownmixCoeffs(lfe_gain=0.5))
        npt.assert_array_equal(out.samples, [[0.5], [0.5]])

    def test_linearity(self):
        rng = np.random.default_rng(2)
        x = rng.uniform(-1, 1, (6, 64)).astype(np.float32)
        y = rng.uniform(-1, 1, (6, 64)).astype(np.float32)
        combined = (0.5 * x.astype(float) - 2 * y.astype(float))

        def mix(samples):
            return downmix_51_to_stereo(AudioBuffer(
                48000, ChannelLayout.SURROUND51, samples)).samples

        npt.assert_allclose(mix(combined),
                            0.5 * mix(x).astype(float)
                            - 2 * mix(y).astype(float), atol=1e-5)

    def test_negative_gain_rejected(self):
        with self.assertRaises(ContractError):
            DownmixCoeffs(center_gain=-0.1)

    def test_requires_surround(self):
        with self.assertRaises(LayoutError):
            downmix_51_to_stereo(stereo([0], [0]))
