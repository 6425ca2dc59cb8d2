from __future__ import annotations
import sys
from typing import List, Optional

from .cli import build_parser, dispatch
from .constants import EXIT_CONFIG
from .logging_setup import configure_logging


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG

    # Die GUI hängt ihren eigenen Log-Handler an
    if args.command != "gui":
        configure_logging(verbose=args.verbose)
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
