'''Command line front end

    vcnac encode in.wav out.vcnb --weights w.vcnw [--config c.cfg]
    vcnac decode in.vcnb out.wav --weights w.vcnw [--layout stereo]
    vcnac simulate speech.wav music.wav fx.wav out.wav [--seed S]
    vcnac metrics ref.wav est.wav --set stereo
    vcnac fit-codebooks latents/ out.vcnw [--weights w.vcnw]
    vcnac init-weights out.vcnw [--config c.cfg] [--seed S]
    vcnac info file

Machine readable results go to standard output, diagnostics to
standard error. Exit status is 0 on success, 2 for usage or contract
violations and 3 for data or format problems.
'''

import argparse
import concurrent.futures
import dataclasses
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__, bitstream
from .audio import AudioBuffer, ChannelLayout, read_wav, write_wav
from .codec import decode, dequantize_latents, encode
from .errors import (EXIT_OK, EXIT_USAGE, ConfigError, ContractError,
                     SampleRateError, StreamFormatError, VcnacError)
from .metrics import (METRIC_SETS, MultiScaleMelParams, SpatialMetricParams,
                      align_lengths, metric_report)
from .model import CodecConfig, param_count
from .rvq import codebook_stats, fit_codebooks_kmeans, quantize
from .simulation import SurroundSimParams, draw_surround_mix, render_surround
from .weights import WeightStore, load_weights, random_init, save_weights


LOGGER = logging.getLogger(__name__)


def _load_config(path: Optional[str]) -> CodecConfig:
    return CodecConfig.from_file(path) if path else CodecConfig()


def _load_model(args) -> Tuple[CodecConfig, WeightStore]:
    config = _load_config(args.config)
    return config, load_weights(args.weights).check(config)


def _write_bytes(data: bytes, path: str):
    try:
        Path(path).write_bytes(data)
    except OSError as e:
        raise StreamFormatError(f'cannot write {path}: {e}') from e


def _read_bytes(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as e:
        raise StreamFormatError(f'cannot read {path}: {e}') from e


def cmd_encode(args) -> int:
    bitstream.bits_per_frame(args.codebooks)
    audio = read_wav(args.input)
    if audio.sample_rate != CodecConfig.sample_rate:
        raise SampleRateError(
            f'unsupported sample rate {audio.sample_rate} Hz, expected '
            f'{CodecConfig.sample_rate} Hz'
        )
    config, weights = _load_model(args)
    latents = encode(audio, weights, config)
    if args.save_latents:
        np.save(args.save_latents, latents.values)
    result = quantize(latents.values, weights.rvq_stack(config),
                      args.codebooks)
    header = bitstream.StreamHeader(
        sample_rate=config.sample_rate,
        source_layout=audio.layout,
        n_codebooks=args.codebooks,
        n_frames=latents.frames,
        config_digest=config.digest(),
    )
    _write_bytes(bitstream.pack(result.indices, header), args.output)
    rate = bitstream.bitrate(args.codebooks, config.frame_rate)
    LOGGER.info('encoded %s (%s, %d samples) into %s',
                args.input, audio.layout.label, audio.frames, args.output)
    print(f'frames={latents.frames} bits_per_frame={header.bits_per_frame} '
          f'bitrate={rate:g}')
    return EXIT_OK


def cmd_decode(args) -> int:
    config, weights = _load_model(args)
    header, indices = bitstream.unpack(_read_bytes(args.input),
                                       expected_digest=config.digest())
    if header.sample_rate != config.sample_rate:
        raise ConfigError(
            f'stream sample rate {header.sample_rate} Hz does not match the '
            f'codec ({config.sample_rate} Hz)'
        )
    target = (ChannelLayout.from_label(args.layout) if args.layout
              else header.source_layout)
    latents = dequantize_latents(indices, weights, config,
                                 header.source_layout)
    decoded = decode(latents, target, weights, config)
    write_wav(decoded, args.output)
    LOGGER.info('decoded %d frames of %s content to %s',
                header.n_frames, header.source_layout.label, target.label)
    return EXIT_OK


def _match_lengths(*buffers: AudioBuffer) -> List[AudioBuffer]:
    frames = min(b.frames for b in buffers)
    if any(b.frames != frames for b in buffers):
        LOGGER.info('trimming simulation inputs to %d frames', frames)
    return [AudioBuffer(b.sample_rate, b.layout, b.samples[:, :frames])
            for b in buffers]


def cmd_simulate(args) -> int:
    params = (SurroundSimParams.from_file(args.params) if args.params
              else SurroundSimParams())
    if args.seed is not None:
        params = dataclasses.replace(params, rng_seed=args.seed)
    speech, primary, secondary = _match_lengths(
        read_wav(args.speech), read_wav(args.primary),
        read_wav(args.secondary))
    mix = draw_surround_mix(params)
    surround = render_surround(speech, primary, secondary, mix,
                               params.lfe_filter_order)
    write_wav(surround, args.output)
    sys.stdout.write(f'rng_seed={params.rng_seed}\n{mix.to_text()}')
    return EXIT_OK


def _score_pair(pair: Tuple[str, str], metric_set: str,
                mel_params: MultiScaleMelParams,
                spatial_params: SpatialMetricParams) -> List[dict]:
    reference_path, estimate_path = pair
    reference, estimate = align_lengths(read_wav(reference_path),
                                        read_wav(estimate_path))
    records = metric_report(reference, estimate, metric_set, mel_params,
                            spatial_params)
    for record in records:
        record['reference'] = reference_path
        record['estimate'] = estimate_path
        record['set'] = metric_set
    return records


def _read_batch(path: str) -> List[Tuple[str, str]]:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f'cannot read batch file {path}: {e}') from e
    pairs = []
    for number, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ConfigError(
                f'{path}:{number}: expected "reference estimate"'
            )
        pairs.append((fields[0], fields[1]))
    return pairs


def _summary_lines(records: List[dict], pair_count: int) -> List[str]:
    '''One line per metric group with the mean of every defined value'''
    groups = {}
    for record in records:
        values = groups.setdefault(record['group'], {}).setdefault(
            record['metric'], [])
        if isinstance(record['value'], float):
            values.append(record['value'])
    lines = []
    for group, metrics in groups.items():
        means = ' '.join(
            f'{metric}={np.mean(values):.3f}' if values else f'{metric}=n/a'
            for metric, values in metrics.items())
        lines.append(f'{group}: {pair_count} pair(s), mean {means}')
    return lines


def cmd_metrics(args) -> int:
    if args.batch:
        pairs = _read_batch(args.batch)
    elif args.reference and args.estimate:
        pairs = [(args.reference, args.estimate)]
    else:
        raise ContractError('give a reference and an estimate, or --batch')
    spatial_params = SpatialMetricParams(
        n_fft=args.n_fft, hop=args.hop, n_mels=args.n_mels)
    mel_params = MultiScaleMelParams()

    def score(pair):
        return _score_pair(pair, args.set, mel_params, spatial_params)

    scored = []
    with concurrent.futures.ThreadPoolExecutor(args.workers) as pool:
        # map keeps input order whatever the completion order
        for records in pool.map(score, pairs):
            for record in records:
                print(json.dumps(record))
            scored += records
    for line in _summary_lines(scored, len(pairs)):
        print(line, file=sys.stderr)
    return EXIT_OK


def _load_latents(directory: str, dim: int) -> np.ndarray:
    paths = sorted(Path(directory).glob('*.npy'))
    if not paths:
        raise ConfigError(f'no .npy latent files in {directory}')
    arrays = []
    for path in paths:
        try:
            array = np.load(path)
        except (OSError, ValueError) as e:
            raise ConfigError(f'cannot load {path}: {e}') from e
        if array.ndim != 2 or array.shape[1] != dim:
            raise ConfigError(
                f'{path}: latents must be (frames, {dim}), got {array.shape}'
            )
        arrays.append(array)
    return np.concatenate(arrays)


def cmd_fit_codebooks(args) -> int:
    config = _load_config(args.config)
    samples = _load_latents(args.latents, config.latent_dim)
    LOGGER.info('fitting %d codebooks on %d latent frames',
                config.rvq.n_codebooks, samples.shape[0])
    stack = fit_codebooks_kmeans(samples, config.rvq, args.iters, args.seed)
    weights = (load_weights(args.weights).check(config) if args.weights
               else random_init(config, args.seed))
    weights = weights.replace({f'rvq.codebook.{i}': book
                               for i, book in enumerate(stack.codebooks)})
    save_weights(weights, args.output)
    result = quantize(samples, stack, len(stack))
    for stats in codebook_stats(result.indices, config.rvq):
        print(json.dumps(dataclasses.asdict(stats)))
    return EXIT_OK


def cmd_init_weights(args) -> int:
    config = _load_config(args.config)
    save_weights(random_init(config, args.seed), args.output)
    counts = param_count(config)
    LOGGER.info('wrote %s: %s', args.output,
                ', '.join(f'{k}={v}' for k, v in counts.items()))
    return EXIT_OK


def _info_stream(data: bytes):
    header, _ = bitstream.unpack(data)
    lines = [
        'format=VCNB',
        f'sample_rate={header.sample_rate}',
        f'source_layout={header.source_layout.label}',
        f'n_codebooks={header.n_codebooks}',
        f'n_frames={header.n_frames}',
        f'config_digest={header.config_digest.hex()}',
        f'bits_per_frame={header.bits_per_frame}',
        f'bitrate={bitstream.bitrate(header.n_codebooks):g}',
    ]
    lines += [f'bitrate.{n}={bitstream.bitrate(n):g}'
              for n in range(1, header.n_codebooks + 1)]
    return lines


def _info_weights(path: str):
    store = load_weights(path)
    lines = [
        'format=VCNW',
        f'config_digest={store.config_digest.hex()}',
        f'tensors={len(store)}',
        f'parameters={sum(a.size for a in store.values())}',
    ]
    for name, (shape, offset) in store.manifest().items():
        dims = 'x'.join(str(d) for d in shape)
        lines.append(f'tensor.{name}={dims}@{offset}')
    return lines


def cmd_info(args) -> int:
    data = _read_bytes(args.file)
    if data[:4] == bitstream.MAGIC:
        lines = _info_stream(data)
    elif data[:4] == b'VCNW':
        lines = _info_weights(args.file)
    else:
        raise StreamFormatError(
            f'{args.file} is neither a VCNB stream nor a VCNW container'
        )
    print('\n'.join(lines))
    return EXIT_OK


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f'not an integer: {text!r}') from None
    if value < 1:
        raise argparse.ArgumentTypeError(f'must be at least 1, got {value}')
    return value


def _model_options(parser, weights_required=True):
    parser.add_argument('--weights', required=weights_required,
                        help='VCNW weight container')
    parser.add_argument('--config',
                        help='codec key=value config (default: full size)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='vcnac', description='Variable-channel neural audio codec')
    parser.add_argument('--version', action='version',
                        version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress, -vv for debug output')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('encode', help='WAV to VCNB stream')
    p.add_argument('input')
    p.add_argument('output')
    p.add_argument('--codebooks', type=int, default=26,
                   help='number of quantizer stages to transmit')
    p.add_argument('--save-latents', metavar='NPY',
                   help='also store the unquantized latents')
    _model_options(p)
    p.set_defaults(func=cmd_encode)

    p = commands.add_parser('decode', help='VCNB stream to WAV')
    p.add_argument('input')
    p.add_argument('output')
    p.add_argument('--layout',
                   choices=[layout.label for layout in ChannelLayout],
                   help='output layout (default: the source layout)')
    _model_options(p)
    p.set_defaults(func=cmd_decode)

    p = commands.add_parser('simulate', help='synthesise 5.1 content')
    p.add_argument('speech')
    p.add_argument('primary')
    p.add_argument('secondary')
    p.add_argument('output')
    p.add_argument('--seed', type=int)
    p.add_argument('--params', help='key=value simulation parameters')
    p.set_defaults(func=cmd_simulate)

    p = commands.add_parser('metrics', help='score estimates as JSON lines')
    p.add_argument('reference', nargs='?')
    p.add_argument('estimate', nargs='?')
    p.add_argument('--set', choices=METRIC_SETS, default='speech')
    p.add_argument('--batch',
                   help='file of "reference estimate" lines to score')
    p.add_argument('--workers', type=_positive_int, default=4)
    p.add_argument('--n-fft', type=int, default=SpatialMetricParams.n_fft)
    p.add_argument('--hop', type=int, default=SpatialMetricParams.hop)
    p.add_argument('--n-mels', type=int, default=SpatialMetricParams.n_mels)
    p.set_defaults(func=cmd_metrics)

    p = commands.add_parser('fit-codebooks',
                            help='k-means codebooks from saved latents')
    p.add_argument('latents', help='directory of .npy latent files')
    p.add_argument('output')
    p.add_argument('--iters', type=int, default=20)
    p.add_argument('--seed', type=int, default=0)
    _model_options(p, weights_required=False)
    p.set_defaults(func=cmd_fit_codebooks)

    p = commands.add_parser('init-weights', help='seeded random weights')
    p.add_argument('output')
    p.add_argument('--config')
    p.add_argument('--seed', type=int, default=0)
    p.set_defaults(func=cmd_init_weights)

    p = commands.add_parser('info', help='describe a VCNB or VCNW file')
    p.add_argument('file')
    p.set_defaults(func=cmd_info)
    return parser


def _configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity,
                                                      logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except VcnacError as e:
        LOGGER.error('%s', e)
        return e.exit_status


if __name__ == '__main__':
    sys.exit(main())
