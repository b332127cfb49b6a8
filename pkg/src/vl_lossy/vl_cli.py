"""
Command-Line Front End
=======================
Subcommands:
    gquantity   G over a (D, epsilon, t) grid
    build-code  build one code variant, export it and print its exact metrics
    sweep       blocklength-n sandwich and Gaussian comparison
    verify      run the bound verification suite
    rd          rate-distortion table over a D grid
    example     write the three-symbol example source and distortion files

Grid flags (--D, --epsilon, --t, --n) may be repeated and accept ``a:b:step``.
Exit status: 0 on success, 1 when a verification verdict fails, 2 on bad input.
"""

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from .vl_analyzer import LossySourceAnalyzer
from .vl_blocklength import SWEEP_COLUMNS, sweep_rows, write_sweep_csv
from .vl_codec import VARIANT_INFO, canonical_variant, simulate
from .vl_covering import DistortionSpec, load_distortion, order_for_t
from .vl_errors import ConfigError, LossyCodingError
from .vl_probability import UNBOUNDED, FinitePmf, format_bits, load_pmf
from .vl_ratedistortion import rd_csv, rd_sweep
from .vl_verify import (
    CLAIMS,
    default_suite_config,
    load_suite_config,
    run_suite,
    write_report,
)

logger = logging.getLogger(__name__)

GRID_TOL = 1e-12
EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    source: Optional[str] = None
    distortion: Optional[str] = None
    binary: Optional[float] = None
    D: Tuple[float, ...] = (0.0,)
    epsilon: Tuple[float, ...] = (0.0,)
    t: Tuple[float, ...] = (1.0,)
    n: Tuple[int, ...] = (1,)
    variant: str = 'stochastic'
    out: Optional[str] = None
    fmt: str = 'csv'
    seed: Optional[int] = None
    workers: int = 1
    samples: int = 0
    config: Optional[str] = None
    negative_control: bool = False
    list_claims: bool = False
    verbose: int = 0

    def __post_init__(self):
        for name in ('D', 'epsilon', 't', 'n'):
            if not getattr(self, name):
                raise ConfigError("grid must not be empty", f"--{name}")
        if self.workers < 1:
            raise ConfigError("must be >= 1", '--workers')
        if self.samples < 0:
            raise ConfigError("must be >= 0", '--samples')


def parse_grid(values: Optional[Sequence[str]], default: Tuple, flag: str,
               integer: bool = False) -> tuple:
    """
    Expand repeated grid flags; ``a:b:step`` is inclusive of b within 1e-12.

    Raises:
        ConfigError: malformed value or non-positive step.
    """
    if not values:
        return default
    out = []
    for raw in values:
        try:
            parts = [float(v) for v in raw.split(':')]
        except ValueError:
            raise ConfigError(f"cannot parse {raw!r}", flag) from None
        if len(parts) == 1:
            out.append(parts[0])
        elif len(parts) == 3:
            a, b, step = parts
            if not step > 0.0 or b < a:
                raise ConfigError(f"grid {raw!r} needs a <= b and step > 0", flag)
            count = int(math.floor((b - a + GRID_TOL) / step)) + 1
            out.extend(a + k * step for k in range(count))
        else:
            raise ConfigError(f"expected a number or a:b:step, got {raw!r}", flag)
    if integer:
        if any(v != int(v) for v in out):
            raise ConfigError("expected integers", flag)
        return tuple(int(v) for v in out)
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='vl-lossy',
        description="Variable-length lossy coding with positive excess distortion probability.",
    )
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='INFO logging (-vv for DEBUG).')
    sub = parser.add_subparsers(dest='command', required=True)

    def instance_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument('--source', help='Source distribution JSON file.')
        p.add_argument('--distortion', help='Distortion matrix JSON file (Hamming if omitted).')
        p.add_argument('--binary', type=float, metavar='P',
                       help='Binary source with P[1] = P under Hamming distortion.')

    def grid_flags(p: argparse.ArgumentParser, *names: str) -> None:
        for name in names:
            p.add_argument(f'--{name}', action='append', metavar='VALUE',
                           help='Value or a:b:step; repeatable.')

    def output_flags(p: argparse.ArgumentParser, formats=('csv', 'json')) -> None:
        p.add_argument('--out', help='Output file (stdout if omitted).')
        p.add_argument('--format', dest='fmt', choices=formats, default=formats[0])

    p = sub.add_parser('gquantity', help='G over a (D, epsilon, t) grid.')
    instance_flags(p)
    grid_flags(p, 'D', 'epsilon', 't')
    output_flags(p)

    p = sub.add_parser('build-code', help='Build a code and report its exact metrics.')
    instance_flags(p)
    grid_flags(p, 'D', 'epsilon', 't')
    aliases = sorted({a for info in VARIANT_INFO.values() for a in info['aliases']} | set(VARIANT_INFO))
    p.add_argument('--variant', choices=aliases, default='stochastic')
    p.add_argument('--samples', type=int, default=0, help='Also simulate N encodings.')
    p.add_argument('--seed', type=int, default=None)
    p.add_argument('--out', help='Code JSON file (embedded in the stdout JSON if omitted).')

    p = sub.add_parser('sweep', help='Blocklength-n sandwich and Gaussian comparison.')
    instance_flags(p)
    grid_flags(p, 'D', 'epsilon', 't', 'n')
    output_flags(p)
    p.add_argument('--workers', type=int, default=1)

    p = sub.add_parser('verify', help='Run the bound verification suite.')
    p.add_argument('--config', help='Suite configuration JSON (built-in default if omitted).')
    p.add_argument('--negative-control', action='store_true',
                   help='Append checks on deliberately corrupted plans and codes.')
    p.add_argument('--list-claims', action='store_true')
    p.add_argument('--seed', type=int, default=None, help='Override the configured seed.')
    p.add_argument('--workers', type=int, default=1)
    p.add_argument('--out', help='JSON lines report (stdout if omitted).')

    p = sub.add_parser('rd', help='Rate-distortion table over a D grid.')
    instance_flags(p)
    grid_flags(p, 'D')
    output_flags(p)

    p = sub.add_parser('example', help='Write the three-symbol example instance files.')
    p.add_argument('--out', default='.', help='Target directory.')
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    get = lambda name, default=None: getattr(args, name, default)  # noqa: E731
    command = args.command
    D_default = (0.1,) if command in ('sweep', 'rd') and get('binary') is not None else (0.0,)
    return RunConfig(
        command=command,
        source=get('source'),
        distortion=get('distortion'),
        binary=get('binary'),
        D=parse_grid(get('D'), D_default, '--D'),
        epsilon=parse_grid(get('epsilon'), (0.0,), '--epsilon'),
        t=parse_grid(get('t'), (0.0,) if command == 'sweep' else (1.0,), '--t'),
        n=parse_grid(get('n'), (1,), '--n', integer=True),
        variant=canonical_variant(get('variant', 'stochastic')),
        out=get('out'),
        fmt=get('fmt', 'csv'),
        seed=get('seed'),
        workers=get('workers', 1),
        samples=get('samples', 0),
        config=get('config'),
        negative_control=get('negative_control', False),
        list_claims=get('list_claims', False),
        verbose=get('verbose', 0),
    )


def load_instance(config: RunConfig) -> Tuple[FinitePmf, DistortionSpec]:
    """Source and distortion from the flags; the three-symbol example by default."""
    if config.binary is not None:
        if not 0.0 <= config.binary <= 1.0:
            raise ConfigError(f"{config.binary} is not a probability", '--binary')
        return (FinitePmf(('0', '1'), (1.0 - config.binary, config.binary)),
                DistortionSpec.hamming('01'))
    if config.source is None:
        return example_instance()
    source = load_pmf(config.source)
    if config.distortion is None:
        return source, DistortionSpec.hamming(source.alphabet)
    return source, load_distortion(config.distortion)


def example_instance() -> Tuple[FinitePmf, DistortionSpec]:
    return FinitePmf(('a', 'b', 'c'), (0.5, 0.3, 0.2)), DistortionSpec.hamming('abc')


def _json_value(value):
    if value is UNBOUNDED or (isinstance(value, float) and math.isinf(value)):
        return 'inf'
    return value


def _write_rows(columns: Sequence[str], rows: Iterable[Sequence], fmt: str, stream: TextIO) -> None:
    rows = list(rows)
    if fmt == 'json':
        json.dump([{c: _json_value(v) for c, v in zip(columns, row)} for row in rows],
                  stream, indent=2)
        stream.write('\n')
        return
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow(['' if v is None else v if isinstance(v, (str, int)) else format_bits(v)
                         for v in row])


class _Output:
    """Context manager yielding the --out file or stdout."""

    def __init__(self, path: Optional[str]):
        self.path = path
        self.stream = None

    def __enter__(self) -> TextIO:
        if self.path is None:
            return sys.stdout
        self.stream = open(self.path, 'w', encoding='utf-8', newline='')
        return self.stream

    def __exit__(self, *exc) -> None:
        if self.stream is not None:
            self.stream.close()


# === Subcommands ===

def cmd_gquantity(config: RunConfig) -> int:
    source, spec = load_instance(config)
    analyzer = LossySourceAnalyzer(source, spec, verbose=config.verbose > 0)
    rows = [(D, eps, t, order_for_t(t), analyzer.g(D, eps, t))
            for D in config.D for eps in config.epsilon for t in config.t]
    with _Output(config.out) as stream:
        _write_rows(('D', 'epsilon', 't', 'alpha', 'G'), rows, config.fmt, stream)
    return EXIT_OK


def cmd_build_code(config: RunConfig) -> int:
    source, spec = load_instance(config)
    D, eps, t = config.D[0], config.epsilon[0], config.t[0]
    analyzer = LossySourceAnalyzer(source, spec, verbose=config.verbose > 0)
    code = analyzer.code(D, eps, config.variant)
    metrics = analyzer.metrics(code, D, t)
    result = {'metrics': metrics._asdict()}
    if config.samples:
        rng = np.random.default_rng(config.seed if config.seed is not None else 0)
        result['simulation'] = simulate(code, source, spec, D, config.samples, rng)._asdict()
    if config.out is None:
        result['code'] = code.to_json()
    else:
        with open(config.out, 'w', encoding='utf-8') as f:
            json.dump(code.to_json(), f, indent=2)
            f.write('\n')
    json.dump(result, sys.stdout, indent=2)
    sys.stdout.write('\n')
    return EXIT_OK


def cmd_sweep(config: RunConfig) -> int:
    source, spec = load_instance(config)
    rows = []
    for D in config.D:
        for eps in config.epsilon:
            for t in config.t:
                rows.extend(sweep_rows(source, spec, D, eps, t, config.n, workers=config.workers))
    with _Output(config.out) as stream:
        if config.fmt == 'csv':
            write_sweep_csv(rows, stream)
        else:
            _write_rows(SWEEP_COLUMNS, rows, 'json', stream)
    return EXIT_OK


def cmd_verify(config: RunConfig) -> int:
    if config.list_claims:
        for claim, text in CLAIMS.items():
            print(f"{claim:22s} {text}")
        return EXIT_OK
    suite = load_suite_config(config.config) if config.config else default_suite_config()
    if config.seed is not None:
        suite = replace(suite, seed=config.seed)
    reports = run_suite(suite, workers=config.workers, negative_control=config.negative_control)
    with _Output(config.out) as stream:
        summary = write_report(reports, stream)
    if summary['failed']:
        print(f"FAILED: {summary['failed']} of {summary['total']} checks; claims: "
              f"{', '.join(summary['claims_failed'])}", file=sys.stderr)
        return EXIT_FAILED
    logger.info("all %d checks passed", summary['total'])
    return EXIT_OK


def cmd_rd(config: RunConfig) -> int:
    source, spec = load_instance(config)
    solutions = rd_sweep(source, spec, config.D)
    with _Output(config.out) as stream:
        if config.fmt == 'csv':
            rd_csv(solutions, stream)
        else:
            json.dump([s.to_json() for s in solutions], stream, indent=2)
            stream.write('\n')
    return EXIT_OK


def cmd_example(config: RunConfig) -> int:
    source, spec = example_instance()
    target = config.out or '.'
    os.makedirs(target, exist_ok=True)
    for name, payload in (('source.json', source.to_json()), ('distortion.json', spec.to_json())):
        with open(os.path.join(target, name), 'w', encoding='utf-8') as f:
            json.dump(payload, f, indent=2)
            f.write('\n')
    print(f"wrote {os.path.join(target, 'source.json')} and {os.path.join(target, 'distortion.json')}")
    return EXIT_OK


COMMANDS = {
    'gquantity': cmd_gquantity,
    'build-code': cmd_build_code,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
    'rd': cmd_rd,
    'example': cmd_example,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    try:
        config = config_from_args(args)
        return COMMANDS[config.command](config)
    except (LossyCodingError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == '__main__':
    sys.exit(main())
