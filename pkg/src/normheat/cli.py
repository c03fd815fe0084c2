"""normheat command line.

SUBCOMMANDS
    evolve, ground-state, classify, sobolev, gn-constant, shoot
        run that task (plus the tasks it depends on) for the scenario in --config
    run     run the tasks listed under ``tasks`` in the scenario
    sweep   rerun the scenario over a list of values of dt, grid_n, g, sigma or mass

OUTPUT CONTRACT
    Artifacts (CSV files, manifest.txt) go to the output directory. Stdout
    carries only data: the manifest, or the sweep summary CSV. Diagnostics go
    to stderr as ``[LEVEL] message``.

EXIT CODES
    0 success, 1 usage or configuration error, 2 regime or precondition
    error, 3 numerical failure (not converged, diverged, shooting failure).
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Dict, List, NoReturn, Optional, Sequence

from . import __version__
from .errors import ConfigError, NormHeatError
from .scenario import SWEEPABLE, parse_config, run_scenario, sweep

logger = logging.getLogger('normheat')

COMMANDS = {
    'evolve': 'evolve',
    'ground-state': 'ground_state',
    'classify': 'classify',
    'sobolev': 'sobolev',
    'gn-constant': 'gn_constant',
    'shoot': 'shoot',
}


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f'[ERROR] {message}\n')


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    common = _ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help='Scenario file (key = value lines)')
    common.add_argument('--out', help='Output directory (overrides output_dir)')
    common.add_argument('--seed-file', help='Initial field from a coord,value CSV (sets initial = file)')
    noise = common.add_mutually_exclusive_group()
    noise.add_argument('-q', '--quiet', action='store_true', help='Only report errors on stderr')
    noise.add_argument('-v', '--verbose', action='count', default=0, help='Increase verbosity (stderr)')

    p = _ArgumentParser(
        prog='normheat',
        description='Mass-preserving nonlinear heat flow: evolution, ground states, potential wells.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument('--version', action='version', version=f'normheat {__version__}')
    sub = p.add_subparsers(dest='command', metavar='COMMAND', required=True)
    for name, task in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=f'Run the {task} task')
    sub.add_parser('run', parents=[common], help='Run the tasks listed in the scenario')
    sw = sub.add_parser(
        'sweep',
        parents=[common],
        help='Rerun the scenario over a list of parameter values',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sw.add_argument('--param', required=True, choices=sorted(SWEEPABLE), help='Parameter to sweep')
    sw.add_argument('--values', required=True, help='Comma-separated values, e.g. 1e-2,5e-3')
    sw.add_argument('--jobs', type=int, default=1, help='Scenarios run in parallel')
    return p.parse_args(argv)


def setup_logging(verbose: int = 0, quiet: bool = False) -> None:
    if quiet:
        level = logging.ERROR
    else:
        level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(verbose, 2)]
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('[%(levelname)s] %(message)s'))
    logger.handlers[:] = [handler]
    logger.setLevel(level)
    logger.propagate = False


def _sweep_exit_code(summary: Path) -> int:
    with summary.open(newline='', encoding='utf-8') as f:
        codes = [int(row['exit_code']) for row in csv.DictReader(f)]
    return max(codes, default=0)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = parse_args(argv)
    setup_logging(args.verbose, args.quiet)
    try:
        try:
            text = Path(args.config).read_text(encoding='utf-8')
        except OSError as exc:
            raise ConfigError([f'{args.config}: cannot read scenario ({exc.strerror})']) from exc
        overrides: Dict[str, str] = {}
        if args.out:
            overrides['output_dir'] = args.out
        if args.seed_file:
            overrides['initial'] = 'file'
            overrides['initial.path'] = args.seed_file
        if args.command in COMMANDS:
            overrides['tasks'] = COMMANDS[args.command]
        config = parse_config(text, overrides)

        if args.command == 'sweep':
            values: List[str] = [v.strip() for v in args.values.split(',') if v.strip()]
            summary = sweep(config, args.param, values, jobs=max(1, args.jobs))
            sys.stdout.write(summary.read_text(encoding='utf-8'))
            return _sweep_exit_code(summary)

        manifest = run_scenario(config)
        sys.stdout.write(manifest.render())
        logger.info('manifest written to %s', manifest.path)
        return manifest.exit_code

    except ConfigError as e:
        for problem in e.problems:
            logger.error('%s', problem)
        return e.exit_code
    except NormHeatError as e:
        logger.error('%s', e)
        return e.exit_code


if __name__ == '__main__':
    sys.exit(main())
