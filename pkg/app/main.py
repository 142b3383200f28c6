"""
Command-line entry point.

    python -m app.main train --preset desk --seed 1 --out runs/desk
    python -m app.main eval --checkpoint runs/desk/checkpoints/final.json --controller bilevel
    python -m app.main simulate --goal 4.5,1.0,-0.5
    python -m app.main sweep --checkpoint runs/desk/checkpoints/final.json
"""

import sys
from typing import Optional, Sequence

from app.cli import build_parser
from app.core import settings, setup_logging, get_logger
from app.core.exceptions import handle_cli_exception

logger = get_logger(__name__)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the chosen command and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    setup_logging(log_level=settings.log_level, environment=settings.environment, log_dir=settings.log_dir)
    logger.debug(f"Running '{args.command}' in {settings.environment} mode")

    try:
        return args.handler(args)
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return 130
    except Exception as e:
        return handle_cli_exception(e)


if __name__ == "__main__":
    sys.exit(main())
