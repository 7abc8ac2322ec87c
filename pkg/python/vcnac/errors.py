'''Error codes and exceptions

Every failure raised by the toolkit is a `VcnacError` carrying an
`ErrorCode`. The code table mirrors a C style error enumeration: zero
is success, negative values are failures, and each code has a fixed
human readable description. The command line front end turns the
exceptions into exit statuses:
    0 ok, 2 usage/contract violation, 3 data/format problem
'''

import enum


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3


class ErrorCode(enum.IntEnum):
    NO_ERROR = 0
    UNKNOWN = -1
    CONTRACT = -2
    LAYOUT = -3
    SHAPE = -4
    SAMPLE_RATE = -5
    AUDIO_FORMAT = -6
    AUDIO_IO = -7
    CONFIG = -8
    WEIGHT_FORMAT = -9
    STREAM_FORMAT = -10
    STREAM_TRUNCATED = -11
    ENCODE = -12
    UNDEFINED_METRIC = -13


_DESCRIPTIONS = {
    ErrorCode.NO_ERROR: 'No error',
    ErrorCode.UNKNOWN: 'Unknown error',
    ErrorCode.CONTRACT: 'Argument violates the operation contract',
    ErrorCode.LAYOUT: 'Channel layout does not match the operation',
    ErrorCode.SHAPE: 'Tensor shapes are inconsistent',
    ErrorCode.SAMPLE_RATE: 'Unsupported sample rate',
    ErrorCode.AUDIO_FORMAT: 'Unsupported WAV encoding or channel count',
    ErrorCode.AUDIO_IO: 'Audio file could not be read or written',
    ErrorCode.CONFIG: 'Configuration is invalid or does not match',
    ErrorCode.WEIGHT_FORMAT: 'Weight container is corrupt',
    ErrorCode.STREAM_FORMAT: 'Encoded stream is corrupt',
    ErrorCode.STREAM_TRUNCATED: 'Encoded stream is truncated',
    ErrorCode.ENCODE: 'Value does not fit its bitstream field',
    ErrorCode.UNDEFINED_METRIC: 'Metric is undefined for the given signals',
}


def get_error_description(code: int) -> str:
    '''Describe an error code, tolerating integers outside the table'''
    try:
        return _DESCRIPTIONS[ErrorCode(code)]
    except ValueError:
        return 'Invalid error code'


class VcnacError(Exception):
    '''Base class of every toolkit failure'''

    code = ErrorCode.UNKNOWN
    exit_status = EXIT_DATA

    def __init__(self, message: str = ''):
        super().__init__(message or get_error_description(self.code))

    @property
    def description(self) -> str:
        return get_error_description(self.code)


class ContractError(VcnacError, ValueError):
    code = ErrorCode.CONTRACT
    exit_status = EXIT_USAGE


class LayoutError(ContractError):
    code = ErrorCode.LAYOUT


class ShapeError(ContractError):
    code = ErrorCode.SHAPE


class SampleRateError(ContractError):
    code = ErrorCode.SAMPLE_RATE


class AudioFormatError(VcnacError):
    code = ErrorCode.AUDIO_FORMAT


class AudioIOError(VcnacError):
    code = ErrorCode.AUDIO_IO


class ConfigError(VcnacError):
    code = ErrorCode.CONFIG


class WeightFormatError(VcnacError):
    code = ErrorCode.WEIGHT_FORMAT


class StreamFormatError(VcnacError):
    code = ErrorCode.STREAM_FORMAT


class TruncationError(StreamFormatError):
    code = ErrorCode.STREAM_TRUNCATED


class EncodeError(VcnacError):
    code = ErrorCode.ENCODE


class UndefinedMetricError(VcnacError):
    code = ErrorCode.UNDEFINED_METRIC
