"""
Ponto de entrada da CLI `mapl`.
Configura logging e métricas, despacha o subcomando e traduz exceções em
códigos de saída (0 sucesso, 2 uso/configuração, 3 falha numérica).
"""

import argparse
import sys
from typing import Optional, Sequence

from . import __version__
from .commands import COMMAND_MODULES
from .config import get_settings
from .exceptions import EXIT_USAGE, MaplError
from .logging_config import setup_logging, structured_logger
from .metrics import setup_metrics, write_metrics


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapl",
        description="Simulate discrete-choice panels, fit MNL/MXL/NN/MAPL models and run experiments.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for module in COMMAND_MODULES:
        module.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = get_settings()
    setup_logging(
        service_name=settings.app_name,
        log_level=settings.log_level,
        log_file=settings.log_file,
        json_format=settings.log_json,
    )
    setup_metrics(settings.app_name, settings.app_version)

    try:
        return int(args.handler(args))
    except MaplError as e:
        structured_logger.error(
            f"{args.command} failed: {e.message}",
            command=args.command,
            error_type=type(e).__name__,
            exit_code=e.exit_code,
        )
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        write_metrics(settings.metrics_file)


if __name__ == "__main__":
    sys.exit(main())
