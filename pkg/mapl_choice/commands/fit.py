"""
`mapl fit`: ajusta um modelo a um CSV e emite o relatório JSON.
"""

import argparse
import sys
from pathlib import Path

from ..dataset import read_csv, split_individuals
from ..exceptions import TrainingDivergedError
from ..metrics import record_clamps, record_fit
from ..schemas import FitReport
from ..services.choice_models import fit
from ._common import add_common_args, resolve_config, write_text_atomic


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("fit", help="Fit one model to a choice CSV")
    add_common_args(parser)
    parser.add_argument("--data", type=Path, required=True, help="Input choice CSV")
    parser.add_argument("--out", type=Path, default=None, help="Report path (stdout if omitted)")
    parser.set_defaults(handler=cmd_fit)


def cmd_fit(args: argparse.Namespace) -> int:
    config, digest = resolve_config(args)
    spec = config.model_spec()
    tcfg = config.train_config()
    ds = read_csv(args.data)

    fraction = config.experiment.validation_fraction
    if fraction > 0 and ds.n_individuals >= 2:
        split = split_individuals(ds, 1.0 - fraction, tcfg.seed)
        train, valid = split.train, split.test
    else:
        train, valid = ds, ds

    label = spec.display_label
    try:
        fitted = fit(spec, train, valid, tcfg)
    except TrainingDivergedError as e:
        record_fit(label, "diverged", 0.0)
        recorded = len(e.trace) if e.trace is not None else 0
        print(f"error: {e.message} ({recorded} checkpoints recorded)", file=sys.stderr)
        return e.exit_code

    record_fit(label, "ok", fitted.wall_seconds, tcfg.epochs)
    record_clamps(label, fitted.clamp_count)

    best = fitted.best_checkpoint
    report = FitReport(
        model=label,
        spec=spec,
        param_count=fitted.param_count,
        distribution_param_count=fitted.model.distribution_param_count,
        n_train_individuals=train.n_individuals,
        n_valid_individuals=valid.n_individuals,
        best_epoch=best.epoch,
        best_valid_nll_per_obs=best.valid_nll_per_obs,
        final_train_nll_per_obs=fitted.trace.checkpoints[-1].train_nll_per_obs,
        clamp_count=fitted.clamp_count,
        trace=fitted.trace,
        seeds=fitted.seeds,
        config_hash=digest,
    )
    text = report.model_dump_json(indent=2, by_alias=True) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(args.out, text)
    return 0
