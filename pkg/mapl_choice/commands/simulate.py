"""
`mapl simulate`: gera um painel sintético e grava CSV + sidecar de metadados.
"""

import argparse
from pathlib import Path

from ..dataset import write_csv
from ..random_streams import derive_seed
from ..services.dgp_service import DgpService
from ._common import add_common_args, resolve_config, write_json_atomic


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("simulate", help="Simulate a choice panel from a DGP")
    add_common_args(parser)
    parser.add_argument("--out", type=Path, required=True, help="Output CSV path")
    parser.add_argument(
        "--true-ll",
        action="store_true",
        help="Also compute the true simulated log-likelihood of the full panel",
    )
    parser.set_defaults(handler=cmd_simulate)


def cmd_simulate(args: argparse.Namespace) -> int:
    config, digest = resolve_config(args)
    spec = config.dgp.to_spec()
    sim = config.sim

    ds, _ = DgpService.simulate_dataset(spec, sim)
    write_csv(ds, args.out)

    meta = {
        "config_hash": digest,
        "dgp": spec.model_dump(mode="json"),
        "sim": sim.model_dump(mode="json"),
        "seeds": {"sim": sim.seed},
        "shape": {
            "n_individuals": ds.n_individuals,
            "tasks_per_individual": ds.tasks_per_individual,
            "alternatives": ds.n_alternatives,
            "features": ds.n_features,
        },
    }
    if args.true_ll:
        oracle_seed = derive_seed(sim.seed, "oracle")
        result = DgpService.true_loglik_detailed(spec, ds, sim.oracle_draws, oracle_seed)
        meta["seeds"]["oracle"] = oracle_seed
        meta["true_loglik"] = result.loglik
        meta["true_nll_per_obs"] = -result.loglik / ds.n_obs
        meta["clamp_count"] = result.clamp_count

    write_json_atomic(Path(f"{args.out}.meta.json"), meta)
    print(f"wrote {ds.n_obs * ds.n_alternatives} rows to {args.out}")
    return 0
