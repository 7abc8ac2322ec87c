import os
import tempfile
import unittest

from vcnac import config as kv
from vcnac.errors import ConfigError
from vcnac.model import CodecConfig
from vcnac.simulation import SurroundSimParams


class TestParseKeyValue(unittest.TestCase):

    def test_comments_and_blank_lines(self):
        text = '# header\n\na = 1\n  b=two words \n'
        self.assertEqual(kv.parse_key_value(text),
                         {'a': '1', 'b': 'two words'})

    def test_missing_separator(self):
        with self.assertRaises(ConfigError) as e:
            kv.parse_key_value('a=1\nnonsense\n')
        self.assertIn('line 2', str(e.exception))

    def test_duplicate_key(self):
        with self.assertRaises(ConfigError):
            kv.parse_key_value('a=1\na=2\n')


class TestDataclassEntries(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'codec.cfg')

    def tearDown(self):
        self.directory.cleanup()

    def test_nested_keys_are_dotted(self):
        entries = kv.to_entries(CodecConfig())
        self.assertEqual(entries['attention.heads'], 4)
        self.assertEqual(entries['rvq.first_size'], 16384)
        self.assertEqual(entries['strides'], (2, 4, 5, 6, 8))

    def test_codec_config_file_roundtrip(self):
        config = CodecConfig.tiny(fusion='mean', activation='elu')
        config.to_file(self.path)
        self.assertEqual(CodecConfig.from_file(self.path), config)

    def test_simulation_params_file_roundtrip(self):
        params = SurroundSimParams(p_center=0.25, rng_seed=1234,
                                   bleed_range=(0.0, 0.05))
        params.to_file(self.path)
        self.assertEqual(SurroundSimParams.from_file(self.path), params)

    def test_missing_keys_keep_defaults(self):
        with open(self.path, 'w') as f:
            f.write('p_center=0\n')
        params = SurroundSimParams.from_file(self.path)
        self.assertEqual(params.p_center, 0.0)
        self.assertEqual(params.p_rear, 0.8)

    def test_unknown_key_rejected(self):
        with open(self.path, 'w') as f:
            f.write('p_centre=0\n')
        with self.assertRaises(ConfigError):
            SurroundSimParams.from_file(self.path)

    def test_invalid_value_is_config_error(self):
        with open(self.path, 'w') as f:
            f.write('p_center=1.5\n')
        with self.assertRaises(ConfigError):
            SurroundSimParams.from_file(self.path)

    def test_unparsable_value(self):
        with open(self.path, 'w') as f:
            f.write('use_attention=maybe\n')
        with self.assertRaises(ConfigError):
            CodecConfig.from_file(self.path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            CodecConfig.from_file(os.path.join(self.directory.name, 'no'))


class TestDigest(unittest.TestCase):

    def test_digest_is_eight_bytes(self):
        self.assertEqual(len(CodecConfig().digest()), 8)

    def test_digest_is_stable(self):
        self.assertEqual(CodecConfig.tiny().digest(),
                         CodecConfig.tiny().digest())

    def test_digest_tracks_every_field(self):
        self.assertNotEqual(CodecConfig.tiny().digest(),
                            CodecConfig.tiny(use_attention=False).digest())
        self.assertNotEqual(CodecConfig.tiny().digest(),
                            CodecConfig.tiny(width=16).digest())
