"""
Argumentos e utilitários compartilhados pelos subcomandos.
"""

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Union

from ..config import RunConfig, config_hash, load_run_config


def add_common_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="YAML run config")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="Override one scalar config key (repeatable)",
    )
    parser.add_argument(
        "--paper-scale",
        action="store_true",
        help="N=10000, 20 replications, 2000 epochs",
    )


def resolve_config(args: argparse.Namespace) -> tuple[RunConfig, str]:
    """Carrega a configuração e imprime o hash em stdout."""
    config = load_run_config(args.config, args.overrides, args.paper_scale)
    digest = config_hash(config)
    print(f"config_hash: {digest}", flush=True)
    return config, digest


def write_text_atomic(path: Union[str, Path], text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp_name, target)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def write_json_atomic(path: Union[str, Path], payload: Any) -> None:
    write_text_atomic(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")


def warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)
