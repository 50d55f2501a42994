"""
`mapl experiment` e `mapl sweep`: grade de má especificação e varredura de N.
Gravam results.csv, summary.csv e results.meta.json no diretório de saída.
"""

import argparse
from pathlib import Path

import pandas as pd

from ..config import RunConfig, get_settings
from ..exceptions import SummaryError
from ..schemas import SUMMARY_COLUMNS, ExperimentPlan
from ..services.experiment_service import run_misspec_experiment, run_sample_size_sweep
from ..services.report_service import summarize_boxplot, write_summary
from ._common import add_common_args, resolve_config, warn, write_json_atomic

RESULTS_FILE = "results.csv"
SUMMARY_FILE = "summary.csv"
META_FILE = "results.meta.json"


def _add_run_args(parser: argparse.ArgumentParser) -> None:
    add_common_args(parser)
    parser.add_argument("--out-dir", type=Path, required=True, help="Output directory")
    parser.add_argument("--workers", type=int, default=None, help="Worker processes")
    parser.add_argument(
        "--resume", action="store_true", help="Skip rows already present in results.csv"
    )


def register(subparsers: argparse._SubParsersAction) -> None:
    experiment = subparsers.add_parser("experiment", help="Run the model × DGP grid")
    _add_run_args(experiment)
    experiment.set_defaults(handler=cmd_experiment)

    sweep = subparsers.add_parser("sweep", help="Run the sample-size sweep")
    _add_run_args(sweep)
    sweep.set_defaults(handler=cmd_sweep)


def _finish(results: pd.DataFrame, out_dir: Path) -> int:
    try:
        summary = summarize_boxplot(results)
    except SummaryError:
        summary = pd.DataFrame(columns=list(SUMMARY_COLUMNS))
    write_summary(summary, out_dir / SUMMARY_FILE)

    failed = int((results["status"] != "ok").sum())
    if failed:
        warn(f"{failed} of {len(results)} rows failed")
    print(f"wrote {len(results)} rows to {out_dir / RESULTS_FILE}")
    return 0


def _write_meta(out_dir: Path, digest: str, config: RunConfig, plan: ExperimentPlan, kind: str) -> None:
    write_json_atomic(
        out_dir / META_FILE,
        {
            "config_hash": digest,
            "kind": kind,
            "config": config.model_dump(mode="json", by_alias=True),
            "plan": plan.model_dump(mode="json", by_alias=True),
        },
    )


def _workers(args: argparse.Namespace) -> int:
    return args.workers if args.workers is not None else get_settings().default_workers


def cmd_experiment(args: argparse.Namespace) -> int:
    config, digest = resolve_config(args)
    plan = config.experiment_plan()
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_meta(out_dir, digest, config, plan, "experiment")
    results = run_misspec_experiment(
        plan, out_dir / RESULTS_FILE, workers=_workers(args), resume=args.resume
    )
    return _finish(results, out_dir)


def cmd_sweep(args: argparse.Namespace) -> int:
    config, digest = resolve_config(args)
    plan = config.sweep_plan()
    out_dir: Path = args.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_meta(out_dir, digest, config, plan, "sweep")
    results = run_sample_size_sweep(
        plan,
        config.experiment.sizes,
        out_dir / RESULTS_FILE,
        workers=_workers(args),
        resume=args.resume,
    )
    return _finish(results, out_dir)
