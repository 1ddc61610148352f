import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError

from metric_estimands.commands import register_all
from metric_estimands.config import settings
from metric_estimands.exceptions import EstimandsError

logger = logging.getLogger("metric_estimands")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metric_estimands",
        description=f"{settings.project_name}: estimands and power of time-dependent A/B test metrics",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    register_all(subparsers)
    return parser


def configure_logging(level: Optional[str] = None) -> None:
    logging.basicConfig(
        level=(level or settings.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "handler", None) is None:
        parser.print_help(sys.stderr)
        return 2

    configure_logging(args.log_level)
    try:
        written = args.handler(args)
    except ValidationError as exc:
        logger.error(f"Invalid scenario for '{args.command}'")
        print(exc, file=sys.stderr)
        return 2
    except (EstimandsError, OSError) as exc:
        logger.error(f"'{args.command}' failed: {exc}")
        return 1

    logger.info(f"'{args.command}' wrote {written}")
    return 0
