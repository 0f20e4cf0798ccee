"""
viraliency - command-line entry point.

Every subcommand module exposes `register(subparsers)` and `run(args) -> int`.
Errors are printed as a single `error code=... message="..."` line on stderr;
logs go to stdout.
"""
import sys
from typing import List, Optional

from pydantic import ValidationError

from viraliency.commands import bench, eta_hist, evaluate, gradcheck, maps, predict, sweep, synth, train
from viraliency.commands.common import CliParser
from viraliency.core.exceptions import ConfigError, LenaError
from viraliency.core.logging import get_run_logger, setup_logging
from viraliency.core.timing import LatencyStats, timed

logger = get_run_logger(__name__)

COMMANDS = (synth, train, predict, maps, gradcheck, evaluate, eta_hist, bench, sweep)


def build_parser() -> CliParser:
    parser = CliParser(
        prog="viraliency",
        description="LENA pooling, siamese virality ranking and viraliency maps.",
    )
    parser.add_argument(
        "--log-level",
        type=str.upper,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default=None,
        help="Override LENA_LOG_LEVEL",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=CliParser)
    subparsers.required = True
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _validation_error(e: ValidationError) -> ConfigError:
    first = e.errors()[0]
    location = ".".join(str(part) for part in first["loc"]) or "value"
    return ConfigError(f"{location}: {first['msg']} ({e.error_count()} error(s))")


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    command = None
    elapsed = LatencyStats()
    try:
        args = build_parser().parse_args(argv)
        if args.log_level:
            setup_logging(args.log_level)
        command = args.command
        logger.info("Command started", command=command)
        with timed(elapsed):
            status = args.handler(args)
    except ValidationError as e:
        error = _validation_error(e)
        logger.error("Command failed", error_code=error.error_code.value, command=command)
        print(error.one_line(), file=sys.stderr)
        return error.exit_code
    except LenaError as e:
        logger.error("Command failed", error_code=e.error_code.value, command=command)
        print(e.one_line(), file=sys.stderr)
        return e.exit_code
    logger.info("Command finished", command=command, elapsed_ms=elapsed.sum_ms)
    return status


if __name__ == "__main__":
    sys.exit(main())
