"""
`mapl report`: tabela de texto com as estatísticas de boxplot de um results.csv.
"""

import argparse
from pathlib import Path

from ..exceptions import SummaryError
from ..services.report_service import read_results, render_table, summarize_boxplot
from ._common import add_common_args, resolve_config


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("report", help="Print a summary table of a results CSV")
    add_common_args(parser)
    parser.add_argument("results", type=Path, help="Results CSV")
    parser.set_defaults(handler=cmd_report)


def cmd_report(args: argparse.Namespace) -> int:
    resolve_config(args)
    if not args.results.exists():
        raise SummaryError(f"results file not found: {args.results}")
    results = read_results(args.results)
    if results.empty:
        print("no rows")
        return 0
    if not (results["status"] == "ok").any():
        print(f"no successful rows ({len(results)} failed)")
        return 0
    print(render_table(summarize_boxplot(results)))
    return 0
