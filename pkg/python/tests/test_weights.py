import itertools
import os
import struct
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from vcnac.errors import ConfigError, WeightFormatError
from vcnac.model import CodecConfig, parameter_shapes
from vcnac.weights import WeightStore, load_weights, parse_weights, \
    random_init, save_weights


class TestRandomInit(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.config = CodecConfig.tiny()
        cls.store = random_init(cls.config, seed=0)

    def test_manifest_complete(self):
        self.assertEqual(
            [(name, self.store[name].shape) for name in self.store],
            [(name, tuple(shape))
             for name, shape in parameter_shapes(self.config)])
        self.assertIs(self.store.check(self.config), self.store)

    def test_same_seed_same_digest(self):
        self.assertEqual(random_init(self.config, seed=0).digest(),
                         self.store.digest())
        self.assertNotEqual(random_init(self.config, seed=1).digest(),
                            self.store.digest())

    def test_embeddings_orthogonal(self):
        for name in ('embeddings.encoder', 'embeddings.decoder'):
            vectors = self.store[name].astype(np.float64)
            gram = vectors @ vectors.T
            for i, j in itertools.combinations(range(6), 2):
                self.assertLess(abs(gram[i, j]), 1e-6)
            npt.assert_allclose(np.linalg.norm(vectors, axis=1),
                                0.01 * np.sqrt(vectors.shape[1]), rtol=1e-5)

    def test_codebooks_reserve_zero_entry(self):
        stack = self.store.rvq_stack(self.config)
        self.assertEqual(len(stack), 26)
        for book in stack.codebooks:
            npt.assert_array_equal(book[0], 0.0)

    def test_tensors_read_only(self):
        with self.assertRaises(ValueError):
            self.store['encoder.input.bias'][0] = 1.0

    def test_unknown_tensor(self):
        with self.assertRaises(ConfigError):
            self.store['encoder.missing']

    def test_check_rejects_other_config(self):
        with self.assertRaises(ConfigError):
            self.store.check(CodecConfig.tiny(fusion='mean'))

    def test_replace(self):
        zeros = np.zeros((8,))
        updated = self.store.replace({'encoder.input.bias': zeros + 1})
        npt.assert_array_equal(updated['encoder.input.bias'], 1.0)
        npt.assert_array_equal(self.store['encoder.input.bias'], 0.0)
        with self.assertRaises(ConfigError):
            self.store.replace({'encoder.input.bias': np.zeros(3)})


class TestContainer(unittest.TestCase):

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.directory.name, 'w.vcnw')
        rng = np.random.default_rng(0)
        self.store = WeightStore({
            'a.weight': rng.standard_normal((3, 2, 5)),
            'a.bias': rng.standard_normal(3),
            'scalar': np.array(2.5),
        }, b'\x01\x02\x03\x04\x05\x06\x07\x08')
        save_weights(self.store, self.path)
        with open(self.path, 'rb') as f:
            self.data = f.read()

    def tearDown(self):
        self.directory.cleanup()

    def test_roundtrip_bit_exact(self):
        loaded = load_weights(self.path)
        self.assertEqual(list(loaded), list(self.store))
        self.assertEqual(loaded.config_digest, self.store.config_digest)
        for name in self.store:
            self.assertEqual(loaded[name].tobytes(),
                             self.store[name].tobytes())
            self.assertEqual(loaded[name].shape, self.store[name].shape)
        self.assertEqual(loaded.digest(), self.store.digest())

    def test_header_layout(self):
        self.assertEqual(self.data[:4], b'VCNW')
        self.assertEqual(self.data[4], 1)
        self.assertEqual(self.data[5:13], self.store.config_digest)
        self.assertEqual(struct.unpack('<I', self.data[13:17])[0], 3)

    def test_blob_is_contiguous(self):
        manifest = self.store.manifest()
        self.assertEqual(manifest['a.weight'], ((3, 2, 5), 0))
        self.assertEqual(manifest['a.bias'], ((3,), 120))
        self.assertEqual(manifest['scalar'], ((), 132))

    def test_bad_magic(self):
        with self.assertRaises(WeightFormatError):
            parse_weights(b'XXXX' + self.data[4:])

    def test_bad_version(self):
        with self.assertRaises(WeightFormatError):
            parse_weights(self.data[:4] + b'\x02' + self.data[5:])

    def test_truncated(self):
        for cut in (3, 20, len(self.data) - 1):
            with self.assertRaises(WeightFormatError):
                parse_weights(self.data[:cut])

    def test_trailing_bytes(self):
        with self.assertRaises(WeightFormatError):
            parse_weights(self.data + b'\x00')

    def test_overlapping_tensors(self):
        store = WeightStore({'x': np.ones(2), 'y': np.ones(2)}, bytes(8))
        save_weights(store, self.path)
        with open(self.path, 'rb') as f:
            data = bytearray(f.read())
        # second manifest entry: header 17, entry 1 is 2+1+1+4+8 bytes
        offset_field = 17 + 16 + 2 + 1 + 1 + 4
        data[offset_field:offset_field + 8] = struct.pack('<Q', 4)
        with self.assertRaises(WeightFormatError):
            parse_weights(bytes(data))

    def test_missing_file(self):
        with self.assertRaises(WeightFormatError):
            load_weights(os.path.join(self.directory.name, 'none.vcnw'))
