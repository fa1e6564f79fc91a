import argparse
import sys
import textwrap

import argcomplete
from importlib.metadata import PackageNotFoundError, version as pkg_version

MODES = ('run', 'grid', 'verify', 'counterexample')


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        # Subcommand parsers share this class and print their own help
        sys.stderr.write(f'error: {message}\n')
        self.print_help()
        self.exit(1)

    def print_help(self, file=None):
        super().print_help(file)

        cmd_examples = textwrap.dedent('''
        Examples:
            fedmuon run --config quadratic.toml
            fedmuon run --config quadratic.toml --seed 3 --out runs/q3
            fedmuon grid --config classification.toml --workers 4
            fedmuon verify
            fedmuon verify --ns-coefficients 1.875 -1.25 0.4
            fedmuon counterexample --a 2 --alpha 0.5 --rounds 1000
        ''')
        print(cmd_examples)


class ArgumentDefaultsHelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        # For --output, always show '(default: stdout)'
        if action.dest == 'output':
            help_str = action.help or ''
            return f'{help_str} (default: stdout)'
        return super()._get_help_string(action)


def add_subparser_with_common_args(subparsers, mode, description):
    new_parser = subparsers.add_parser(
        mode,
        description=description,
        help=description,
        formatter_class=ArgumentDefaultsHelpFormatter
    )
    new_parser._optionals.title = 'Options'

    new_parser.add_argument(
        '--output',
        type=argparse.FileType('w'),
        default=sys.stdout,
        metavar='FILE',
        help='File for the result table'
    )
    new_parser.add_argument(
        '-v', '--verbose',
        action='store_true',
        help='Log round progress to stderr'
    )
    return new_parser


def add_experiment_args(parser):
    parser.add_argument(
        '--config',
        type=str,
        required=True,
        metavar='PATH',
        help='Experiment config (TOML)'
    )
    parser.add_argument(
        '--seed',
        type=int,
        metavar='INT',
        help='Run this seed only instead of the seeds listed in the config'
    )
    parser.add_argument(
        '--out',
        type=str,
        metavar='DIR',
        help='Output directory (default: [output] dir of the config)'
    )
    parser.add_argument(
        '--workers',
        type=int,
        metavar='INT',
        help='Worker count; overrides FEDMUON_WORKERS and the config'
    )


def package_version(prog):
    try:
        return pkg_version(prog)
    except PackageNotFoundError:
        return 'unknown'


def build_parser():
    prog = 'fedmuon'
    desc = 'federated Muon with control variates: experiments and checks'
    parser = ArgumentParser(prog=prog, description=f'{prog} - {desc}')
    parser.add_argument('--version', action='version',
                        version=f'{prog} {package_version(prog)}')
    parser._optionals.title = 'Options'
    subparsers = parser.add_subparsers(title='Modes', dest='mode')

    # Run
    parser_run = add_subparser_with_common_args(
        subparsers,
        'run',
        'Run one experiment and write its traces'
    )
    add_experiment_args(parser_run)

    # Grid
    parser_grid = add_subparser_with_common_args(
        subparsers,
        'grid',
        'Run the stepsize/alpha grid and write a leaderboard'
    )
    add_experiment_args(parser_grid)

    # Verify
    parser_verify = add_subparser_with_common_args(
        subparsers,
        'verify',
        'Run the invariant checks and print a pass/fail table'
    )
    parser_verify.add_argument(
        '--ns-coefficients',
        type=float,
        nargs=3,
        metavar=('A', 'B', 'C'),
        help='Newton-Schulz coefficients used by the polynomial-bound check '
             '(default: 1.875 -1.25 0.375)'
    )

    # Counterexample
    parser_counter = add_subparser_with_common_args(
        subparsers,
        'counterexample',
        'Compare LocalMuon and FedMuon on the two-client counterexample'
    )
    parser_counter.add_argument(
        '--a',
        type=float,
        default=1.0,
        metavar='REAL',
        help='Offset between the two client minimizers'
    )
    parser_counter.add_argument(
        '--alpha',
        type=float,
        default=0.5,
        metavar='REAL',
        help='Momentum parameter in (0, 1]'
    )
    parser_counter.add_argument(
        '--rounds',
        type=int,
        default=1000,
        metavar='N',
        help='Number of rounds'
    )
    parser_counter.add_argument(
        '--eta',
        type=float,
        default=0.01,
        metavar='REAL',
        help='Stepsize'
    )
    parser_counter.add_argument(
        '--every',
        type=int,
        default=100,
        metavar='N',
        help='Print every N-th round'
    )
    parser.mode_parsers = subparsers.choices
    return parser


def parse_arguments(argv=None):
    parser = build_parser()

    # Enable shell autocompletion
    argcomplete.autocomplete(parser)

    # Parse arguments
    args = parser.parse_args(argv)

    # Print help if mode is not specified
    if args.mode is None:
        parser.print_help()
        sys.exit(0)

    mode_parser = parser.mode_parsers[args.mode]

    if args.mode in ('run', 'grid'):
        if args.seed is not None and args.seed < 0:
            mode_parser.error('argument --seed: must be a non-negative integer')
        if args.workers is not None and args.workers < 1:
            mode_parser.error('argument --workers: must be at least 1')

    if args.mode == 'counterexample':
        if args.rounds < 1:
            mode_parser.error('argument --rounds: must be at least 1')
        if args.every < 1:
            mode_parser.error('argument --every: must be at least 1')

    return args
