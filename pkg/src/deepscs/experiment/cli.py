"""Command-line front end: ``deepscs {train,eval,classic,flops,plotdata}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from deepscs.experiment.config import SCENARIOS, SYSTEMS, ConfigError, ExperimentConfig, desk_preset, robust_preset
from deepscs.experiment.runs import CHECKPOINT_NAME, emit_plotdata, run_classic, run_eval, run_train
from deepscs.metrics import MetricReport, flops_model

PRESETS = {"robust": robust_preset, "desk": desk_preset}


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {text}")
    return value


def build_config(args) -> ExperimentConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "scenario", None):
        overrides["scenario"] = args.scenario
    if getattr(args, "system", None):
        overrides["system"] = args.system
    if getattr(args, "config", None):
        cfg = ExperimentConfig.load(args.config)
        return cfg.replace(**overrides) if overrides else cfg
    return PRESETS[args.preset](**overrides)


def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--config", type=Path, help="experiment config (JSON)")
    p.add_argument("--preset", choices=sorted(PRESETS), default="robust",
                   help="built-in config used when --config is absent (default: robust)")
    p.add_argument("--seed", type=_u64, help="override the config seed")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="override the scenario")
    p.add_argument("--system", choices=SYSTEMS, help="override the system")
    p.add_argument("--out", type=Path, required=out_required, help="run directory")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepscs", description="Semantic speech transceiver simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a neural system and write a checkpoint")
    _common(p)

    p = sub.add_parser("eval", help="sweep a checkpoint over the channel/SNR grid")
    _common(p)
    p.add_argument("--checkpoint", type=Path, help=f"checkpoint to evaluate (default: <out>/{CHECKPOINT_NAME})")

    p = sub.add_parser("classic", help="run the PCM + turbo + 64-QAM baseline")
    _common(p)

    p = sub.add_parser("flops", help="print the FLOPs breakdown of a neural system")
    _common(p, out_required=False)

    p = sub.add_parser("plotdata", help="merge metric CSVs into per-(metric, channel) plot files")
    p.add_argument("reports", nargs="+", help="metric CSVs, optionally as SYSTEM=PATH")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    return parser


def _system_of(spec: str) -> tuple[str, Path]:
    if "=" in spec:
        name, path = spec.split("=", 1)
        return name, Path(path)
    path = Path(spec)
    stem = path.stem
    return (stem[len("metrics_"):] if stem.startswith("metrics_") else stem), path


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "plotdata":
            reports = {}
            for spec in args.reports:
                name, path = _system_of(spec)
                reports[name] = MetricReport.from_csv(path.read_text(encoding="utf-8"), name)
            for path in emit_plotdata(reports, args.out):
                print(path)
            return 0
        cfg = build_config(args)
        if args.command == "train":
            print(run_train(cfg, args.out, progress=lambda e, loss: print(f"epoch {e} loss {loss:.6g}", flush=True)))
        elif args.command == "eval":
            print(run_eval(cfg, args.checkpoint or args.out / CHECKPOINT_NAME, args.out))
        elif args.command == "classic":
            print(run_classic(cfg, args.out))
        elif args.command == "flops":
            if cfg.system == "classic":
                raise ConfigError("the classic system has no neural FLOPs")
            print(json.dumps(flops_model(cfg.model_config()).as_dict(), indent=2))
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"deepscs: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
