"""Command-line interface: ``riscsi <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import experiments
from .config import ExperimentConfig
from .dataio import load_model, save_dataset, save_model
from .numerics import RngStream
from .pilot import ActiveSet
from .pipeline import STAGES, build_stage_dataset, flop_report, train_pipeline

log = logging.getLogger("riscsi")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="YAML config layered over the profile defaults")
    scale = p.add_mutually_exclusive_group()
    scale.add_argument("--desk-scale", dest="profile", action="store_const", const="desk",
                       help="desk-scale defaults (M=8, N=32, N1=8); the default")
    scale.add_argument("--paper-scale", dest="profile", action="store_const", const="paper",
                       help="full-scale defaults (M=16, N=128, N1=32)")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    p.set_defaults(profile="desk")
    return p


def _snr(text: str):
    """``10`` or a comma list ``5,15`` (mixed-SNR training)."""
    values = tuple(float(v) for v in text.split(","))
    return values[0] if len(values) == 1 else values


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="riscsi", description="RIS-aided MIMO CSI acquisition experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", parents=[common], help="write stage datasets (RISD files)")
    g.add_argument("--stage", choices=STAGES, default="DE")
    g.add_argument("--split", choices=("train", "val", "test"), action="append",
                   help="split(s) to write; default train and val")
    g.add_argument("--snr", type=_snr, default=10.0, help="SNR in dB, or a comma list for mixed SNR")
    g.add_argument("--n1", type=int, help="number of active elements (default geometry.num_active)")
    g.add_argument("--model", type=Path, help="model directory supplying the upstream stages")
    g.add_argument("--oracle-direct", action="store_true", help="strip the true direct channel")

    t = sub.add_parser("train", parents=[common], help="train one stage or the full pipeline")
    t.add_argument("--stage", choices=STAGES + ("all",), default="all")
    t.add_argument("--sweep", choices=("snr", "ratio"),
                   help="train every operating point of a sweep instead of a single one")
    t.add_argument("--snr", type=_snr, default=10.0, help="training SNR in dB (single operating point)")
    t.add_argument("--n1", type=int, help="number of active elements (single operating point)")

    e = sub.add_parser("eval", parents=[common], help="run an NMSE sweep from trained checkpoints")
    e.add_argument("--sweep", choices=("snr", "ratio"), default="snr")
    e.add_argument("--methods", help="comma list of methods (default: config methods)")

    f = sub.add_parser("flops", parents=[common], help="per-stage multiply-accumulate counts")
    f.add_argument("--n1", type=int)

    sub.add_parser("selftest", parents=[common], help="run the built-in oracle and property checks")
    return parser


def _load_config(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = {"dir": str(args.out)}
    return ExperimentConfig.load(args.config, args.profile, overrides)


def cmd_gen_data(cfg: ExperimentConfig, args) -> int:
    n1 = args.n1 or cfg.raw["geometry"]["num_active"]
    active = ActiveSet.from_policy(cfg.raw["geometry"]["active_policy"], cfg.scenario.num_ris, n1)
    upstream = load_model(args.model) if args.model else None
    out = cfg.output_dir / "data"
    for split in args.split or ["train", "val"]:
        n = cfg.raw["samples"][split]
        ds = build_stage_dataset(args.stage, n, args.snr, active, upstream, RngStream(cfg.seed),
                                 cfg.scenario, split, args.oracle_direct)
        path = out / f"{args.stage.lower()}_{experiments.snr_tag(args.snr)}_n1-{n1}_{split}.risd"
        digest = save_dataset(ds, path)
        print(f"{path}  {len(ds)} samples  sha256 {digest[:16]}")
    return 0


def cmd_train(cfg: ExperimentConfig, args) -> int:
    if args.sweep:
        if args.stage != "all":
            raise ValueError("--sweep trains whole pipelines; drop --stage")
        models = experiments.train_models(cfg, args.sweep)
        for train_snr, n1 in models:
            print(f"trained {experiments.model_dir(cfg, train_snr, n1)}")
        return 0
    n1 = args.n1 or cfg.raw["geometry"]["num_active"]
    directory = experiments.model_dir(cfg, args.snr, n1)
    model = None
    if args.stage == "all":
        stages = STAGES
    else:
        stages = (args.stage,)
        if args.stage != "DE":
            model = load_model(directory, partial=True)
        # stages downstream of a retrained one are stale
        for later in STAGES[STAGES.index(args.stage) + 1:]:
            (directory / f"{later.lower()}.rckp").unlink(missing_ok=True)
            if model is not None:
                setattr(model, later.lower(), None)
    histories = {}
    model = train_pipeline(cfg.pipeline_config(args.snr, n1), cfg.config_hash, histories, stages, model)
    hashes = save_model(model, directory)
    for stage, hist in histories.items():
        last = hist[-1]
        best = min(h.val_nmse for h in hist)
        print(f"{stage}: {len(hist)} epochs, final val NMSE {last.val_nmse:.5f}, best {best:.5f}, "
              f"sha256 {hashes[stage][:16]}")
    print(f"saved {directory}")
    return 0


def cmd_eval(cfg: ExperimentConfig, args) -> int:
    methods = args.methods.split(",") if args.methods else None
    run = experiments.sweep_snr if args.sweep == "snr" else experiments.sweep_ratio
    result = run(cfg, methods=methods)
    path = result.write(cfg.output_dir / f"sweep_{args.sweep}.csv")
    sys.stdout.write(result.to_csv())
    print(f"wrote {path}")
    return 0


def cmd_flops(cfg: ExperimentConfig, args) -> int:
    n1 = args.n1 or cfg.raw["geometry"]["num_active"]
    report = flop_report(cfg.pipeline_config(10.0, n1).network_specs())
    g = cfg.raw["geometry"]
    print(json.dumps({"M": g["num_bs"], "N": g["num_ris"], "N1": n1, "macs": report.as_dict()}, indent=2))
    return 0


def cmd_selftest(cfg: ExperimentConfig, args) -> int:
    from .selftest import run_selftest

    return run_selftest()


COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "eval": cmd_eval,
            "flops": cmd_flops, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg, args)
    except Exception as exc:  # any failed run: message and exit 1
        print(f"riscsi {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            raise
        return 1


if __name__ == "__main__":
    sys.exit(main())
