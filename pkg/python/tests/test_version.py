import unittest
import vcnac


class TestVersion(unittest.TestCase):

    def test_version(self):
        self.assertTrue(hasattr(vcnac, '__version__'))
