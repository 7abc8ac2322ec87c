'''Flat key=value configuration files

Configuration objects are frozen dataclasses. They are written one
field per line as `name=value`; tuples are comma separated and nested
dataclasses are flattened with a dotted prefix, so an attention spec
inside a codec config appears as `attention.heads=4`. Lines starting
with `#` and blank lines are ignored.
'''

import dataclasses
import hashlib
from pathlib import Path
from typing import Any, Dict, Mapping, Type, TypeVar, Union

from .errors import ConfigError


T = TypeVar('T')
PathLike = Union[str, Path]


def parse_key_value(text: str) -> Dict[str, str]:
    '''Parse key=value lines into an ordered mapping of strings'''
    entries = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigError(
                f'line {number}: expected key=value, got {raw!r}')
        if key in entries:
            raise ConfigError(f'line {number}: key {key!r} defined twice')
        entries[key] = value.strip()
    return entries


def format_key_value(entries: Mapping[str, Any]) -> str:
    return ''.join(f'{key}={_format_value(value)}\n'
                   for key, value in entries.items())


def read_key_value(path: PathLike) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding='utf-8')
    except OSError as e:
        raise ConfigError(f'cannot read config {path}: {e}') from e
    return parse_key_value(text)


def write_key_value(entries: Mapping[str, Any], path: PathLike) -> None:
    try:
        Path(path).write_text(format_key_value(entries), encoding='utf-8')
    except OSError as e:
        raise ConfigError(f'cannot write config {path}: {e}') from e


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list)):
        return ','.join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_scalar(text: str, like: Any, key: str) -> Any:
    try:
        if isinstance(like, bool):
            lowered = text.lower()
            if lowered not in ('true', 'false', '1', '0'):
                raise ValueError(text)
            return lowered in ('true', '1')
        if isinstance(like, int):
            return int(text)
        if isinstance(like, float):
            return float(text)
    except ValueError as e:
        raise ConfigError(f'{key}: cannot parse {text!r}') from e
    return text


def _parse_value(text: str, like: Any, key: str) -> Any:
    if isinstance(like, tuple):
        parts = [p.strip() for p in text.split(',') if p.strip()]
        element = like[0] if like else 0.0
        return tuple(_parse_scalar(p, element, key) for p in parts)
    return _parse_scalar(text, like, key)


def to_entries(obj: Any, prefix: str = '') -> Dict[str, Any]:
    '''Flatten a (possibly nested) config dataclass into key/value pairs'''
    entries = {}
    for field in dataclasses.fields(obj):
        value = getattr(obj, field.name)
        key = prefix + field.name
        if dataclasses.is_dataclass(value):
            entries.update(to_entries(value, key + '.'))
        else:
            entries[key] = value
    return entries


def from_entries(cls: Type[T], entries: Mapping[str, str],
                 prefix: str = '') -> T:
    '''Build a config dataclass, keeping defaults for missing keys

    Unknown keys are rejected so that a typo in a config file never
    passes silently.
    '''
    default = cls()
    if not prefix:
        unknown = sorted(set(entries) - set(to_entries(default)))
        if unknown:
            raise ConfigError(f'unknown config keys: {", ".join(unknown)}')
    kwargs = {}
    for field in dataclasses.fields(cls):
        key = prefix + field.name
        like = getattr(default, field.name)
        if dataclasses.is_dataclass(like):
            kwargs[field.name] = from_entries(type(like), entries, key + '.')
        elif key in entries:
            kwargs[field.name] = _parse_value(entries[key], like, key)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f'invalid {cls.__name__}: {e}') from e


def config_digest(obj: Any) -> bytes:
    '''8-byte digest of the canonical key=value rendering of a config'''
    canonical = format_key_value(to_entries(obj)).encode('utf-8')
    return hashlib.sha256(canonical).digest()[:8]
