#!/usr/bin/env python3
import sys

from loguru import logger

from fedmuon.core.argparser import parse_arguments
from fedmuon.core.errors import ConfigError, NumericalAbort
from fedmuon.core.logger import configure
from fedmuon.modes.counterexample import cli_counterexample
from fedmuon.modes.grid import cli_grid
from fedmuon.modes.run import cli_run
from fedmuon.modes.verify import cli_verify

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def dispatch(args):
    if args.mode == 'run':
        return cli_run(
            args.config,
            seed=args.seed,
            out=args.out,
            workers=args.workers,
            output=args.output
        )
    elif args.mode == 'grid':
        return cli_grid(
            args.config,
            seed=args.seed,
            out=args.out,
            workers=args.workers,
            output=args.output
        )
    elif args.mode == 'verify':
        return cli_verify(
            ns_coefficients=args.ns_coefficients,
            output=args.output
        )
    elif args.mode == 'counterexample':
        return cli_counterexample(
            args.a,
            args.alpha,
            args.rounds,
            eta=args.eta,
            every=args.every,
            output=args.output
        )
    raise ValueError(f"Unknown mode: '{args.mode}'")


def main(argv=None):
    if sys.version_info < (3, 11):
        print("fedmuon requires Python 3.11 or higher")
        sys.exit(1)

    args = parse_arguments(argv)
    configure(args.verbose)

    try:
        code = dispatch(args)
    except ConfigError as e:
        logger.error(str(e))
        code = EXIT_CONFIG
    except NumericalAbort as e:
        logger.error(f'Numerical abort after {len(e.traces)} records: {e}')
        code = EXIT_NUMERICAL

    sys.exit(code)


if __name__ == '__main__':
    main()
