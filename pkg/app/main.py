"""
Command-Line Entry Point
"""
import argparse
import sys
import tomllib
from pathlib import Path
from typing import List, Optional

from loguru import logger
from pydantic import ValidationError

from app.config.settings import load_settings
from app.constants.enums import MarginMethod
from app.exceptions import DataParseError, DataValidationError, MDAMError
from app.middleware.logging import configure_logging
from app.routes import COMMANDS

CLI_METHODS = [m.value for m in MarginMethod if m != MarginMethod.BD]


def create_application() -> argparse.ArgumentParser:
    """Create and configure the argument parser"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML run configuration")
    common.add_argument("--seed", type=int, default=None, help="Master seed")
    common.add_argument("--threads", type=int, default=None, help="Worker threads")
    common.add_argument("--out", type=Path, default=None, help="Output directory")
    common.add_argument(
        "--method", choices=CLI_METHODS, default=None, help="Unit-nonresponse method"
    )

    parser = argparse.ArgumentParser(
        prog="mdam",
        description="Multiple imputation of survey nonresponse under known population margins",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers, common)
    return parser


def run(argv: Optional[List[str]] = None) -> int:
    """Parse, configure and dispatch; returns the process exit code"""
    args = create_application().parse_args(argv)
    if args.method is not None:
        args.method = MarginMethod(args.method)
    try:
        try:
            settings = load_settings(
                args.config, SEED=args.seed, THREADS=args.threads, OUTPUT_DIR=args.out
            )
        except ValidationError as e:
            raise DataValidationError(f"Invalid configuration: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise DataParseError(f"Invalid configuration file {args.config}: {e}") from e

        if args.method is not None and args.command != "simulate":
            settings.MARGINS = settings.MARGINS.model_copy(update={"method": args.method})
        configure_logging(settings.LOG_LEVEL)
        logger.info(f"{settings.PROJECT_NAME} {settings.VERSION}: {args.command}")
        return args.handler(settings, args)
    except MDAMError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        return e.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
