import os
import tempfile
import unittest

import numpy as np
import numpy.testing as npt
import soundfile
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from vcnac.audio import AudioBuffer, ChannelLayout, chunk, read_wav, \
    write_wav
from vcnac.errors import AudioFormatError, AudioIOError, ContractError, \
    LayoutError


def buffers():
    layouts = st.sampled_from(list(ChannelLayout))
    return layouts.flatmap(lambda layout: hnp.arrays(
        np.float32,
        st.integers(0, 300).map(lambda n: (layout.channel_count, n)),
        elements=st.floats(-1.0, 1.0, width=32),
    ).map(lambda samples: AudioBuffer(48000, layout, samples)))


class TestChannelLayout(unittest.TestCase):

    def test_channel_counts(self):
        self.assertEqual(
            [layout.channel_count for layout in ChannelLayout], [1, 2, 6])

    def test_surround_order(self):
        self.assertEqual(ChannelLayout.SURROUND51.channel_names,
                         ('L', 'R', 'C', 'LFE', 'Ls', 'Rs'))

    def test_from_channel_count(self):
        self.assertIs(ChannelLayout.from_channel_count(6),
                      ChannelLayout.SURROUND51)
        with self.assertRaises(AudioFormatError):
            ChannelLayout.from_channel_count(4)

    def test_from_label(self):
        self.assertIs(ChannelLayout.from_label('stereo'),
                      ChannelLayout.STEREO)
        with self.assertRaises(LayoutError):
            ChannelLayout.from_label('quad')


class TestAudioBuffer(unittest.TestCase):

    def test_channel_count_must_match_layout(self):
        with self.assertRaises(LayoutError):
            AudioBuffer(48000, ChannelLayout.STEREO, np.zeros((3, 10)))

    def test_samples_are_read_only_float32(self):
        buffer = AudioBuffer(48000, ChannelLayout.MONO, [[0.5, -0.5]])
        self.assertEqual(buffer.samples.dtype, np.float32)
        with self.assertRaises(ValueError):
            buffer.samples[0, 0] = 1.0

    def test_source_array_is_copied(self):
        source = np.zeros((1, 4), np.float32)
        buffer = AudioBuffer(48000, ChannelLayout.MONO, source)
        source[0, 0] = 1.0
        self.assertEqual(buffer.samples[0, 0], 0.0)

    def test_channel_by_name(self):
        samples = np.arange(12, dtype=np.float32).reshape(6, 2)
        buffer = AudioBuffer(48000, ChannelLayout.SURROUND51, samples)
        npt.assert_array_equal(buffer.channel('Ls'), [8.0, 9.0])
        with self.assertRaises(LayoutError):
            buffer.channel('M')

    def test_rejects_bad_sample_rate(self):
        with self.assertRaises(ContractError):
            AudioBuffer(0, ChannelLayout.MONO, np.zeros((1, 1)))


class TestWavIO(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'audio.wav')

    def tearDown(self):
        self.directory.cleanup()

    def test_stereo_silence(self):
        write_wav(AudioBuffer.silence(48000, ChannelLayout.STEREO, 480),
                  self.path)
        buffer = read_wav(self.path)
        self.assertEqual(buffer.sample_rate, 48000)
        self.assertIs(buffer.layout, ChannelLayout.STEREO)
        self.assertEqual(buffer.frames, 480)
        self.assertFalse(np.any(buffer.samples))

    def test_pcm16_scaling(self):
        data = np.array([-32768, 0, 16384, 32767], dtype=np.int16)
        soundfile.write(self.path, data, 48000, subtype='PCM_16')
        npt.assert_array_equal(read_wav(self.path).samples[0],
                               [-1.0, 0.0, 0.5, 32767 / 32768])

    def test_pcm24_is_read(self):
        data = np.array([[0.5, -0.25]], dtype=np.float64).T
        soundfile.write(self.path, data, 44100, subtype='PCM_24')
        buffer = read_wav(self.path)
        self.assertEqual(buffer.sample_rate, 44100)
        npt.assert_array_equal(buffer.samples[0], [0.5, -0.25])

    def test_header_of_one_second_mono(self):
        write_wav(AudioBuffer.silence(48000, ChannelLayout.MONO, 48000),
                  self.path)
        info = soundfile.info(self.path)
        self.assertEqual(info.frames, 48000)
        self.assertEqual(info.channels, 1)
        self.assertEqual(info.subtype, 'FLOAT')

    def test_empty_buffer(self):
        empty = AudioBuffer.silence(48000, ChannelLayout.MONO, 0)
        write_wav(empty, self.path)
        self.assertEqual(read_wav(self.path), empty)

    def test_four_channels_rejected(self):
        soundfile.write(self.path, np.zeros((10, 4)), 48000,
                        subtype='FLOAT')
        with self.assertRaises(AudioFormatError):
            read_wav(self.path)

    def test_unsupported_encoding_rejected(self):
        soundfile.write(self.path, np.zeros(10), 48000, subtype='PCM_U8')
        with self.assertRaises(AudioFormatError):
            read_wav(self.path)

    def test_missing_file(self):
        with self.assertRaises(AudioIOError):
            read_wav(os.path.join(self.directory.name, 'missing.wav'))

    def test_truncated_file(self):
        with open(self.path, 'wb') as f:
            f.write(b'RIFF\x10\x00\x00\x00WAVE')
        with self.assertRaises(AudioIOError):
            read_wav(self.path)

    def cut_data_section(self, subtype, drop):
        data = np.linspace(-0.5, 0.5, 1000)
        soundfile.write(self.path, data, 48000, subtype=subtype)
        with open(self.path, 'rb') as f:
            contents = f.read()
        with open(self.path, 'wb') as f:
            f.write(contents[:-drop])

    def test_truncated_data_section(self):
        self.cut_data_section('PCM_16', 1000)
        with self.assertRaises(AudioIOError) as ctx:
            read_wav(self.path)
        self.assertIn('truncated', str(ctx.exception))

    def test_partial_last_frame(self):
        self.cut_data_section('PCM_24', 1)
        with self.assertRaises(AudioIOError):
            read_wav(self.path)

    def test_complete_pcm16_file(self):
        soundfile.write(self.path, np.zeros(1000), 48000, subtype='PCM_16')
        self.assertEqual(read_wav(self.path).frames, 1000)

    @settings(max_examples=30, deadline=None)
    @given(buffers())
    def test_roundtrip_is_bit_exact(self, buffer):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'x.wav')
            write_wav(buffer, path)
            self.assertEqual(read_wav(path), buffer)


class TestChunk(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(0)
        self.buffer = AudioBuffer(
            48000, ChannelLayout.STEREO,
            rng.uniform(-1, 1, (2, 144000)).astype(np.float32))

    def test_training_chunks(self):
        chunks = chunk(self.buffer, 1.28)
        self.assertEqual(len(chunks), 2)
        for piece in chunks:
            self.assertEqual(piece.frames, 61440)
            self.assertIs(piece.layout, ChannelLayout.STEREO)

    def test_shorter_than_chunk(self):
        one_second = AudioBuffer.silence(48000, ChannelLayout.MONO, 48000)
        self.assertEqual(chunk(one_second, 2.0), [])

    def test_concatenation_is_prefix(self):
        chunks = chunk(self.buffer, 0.7)
        joined = np.concatenate([c.samples for c in chunks], axis=1)
        npt.assert_array_equal(joined,
                               self.buffer.samples[:, :joined.shape[1]])

    def test_sub_sample_chunk_rejected(self):
        with self.assertRaises(ContractError):
            chunk(self.buffer, 1e-6)
        with self.assertRaises(ContractError):
            chunk(self.buffer, float('nan'))
