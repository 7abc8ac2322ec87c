'''Variable-channel neural audio codec toolkit'''

from importlib import metadata

from .audio import AudioBuffer, ChannelLayout, read_wav, write_wav
from .bitstream import StreamHeader, bitrate, bits_per_frame, pack, unpack
from .codec import LatentSequence, decode, encode, roundtrip
from .errors import VcnacError, get_error_description
from .model import CodecConfig, param_count
from .rvq import RvqSpec, RvqStack
from .weights import WeightStore, load_weights, random_init, save_weights


try:
    __version__ = metadata.version("vcnac")
except metadata.PackageNotFoundError:
    __version__ = "0.0.0"

__all__ = (
    '__version__',
    'AudioBuffer',
    'ChannelLayout',
    'CodecConfig',
    'LatentSequence',
    'RvqSpec',
    'RvqStack',
    'StreamHeader',
    'VcnacError',
    'WeightStore',
    'bitrate',
    'bits_per_frame',
    'decode',
    'encode',
    'get_error_description',
    'load_weights',
    'pack',
    'param_count',
    'random_init',
    'read_wav',
    'roundtrip',
    'save_weights',
    'unpack',
    'write_wav',
)
