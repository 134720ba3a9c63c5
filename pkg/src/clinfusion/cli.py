"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 missing input file, 3 invalid
configuration. The log level comes from ``CLINFUSION_LOG_LEVEL``.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ExperimentConfig, flat_sections, load_config, with_master_seed
from .errors import ClinFusionError, ConfigError
from .pipeline import experiment

log = logging.getLogger("clinfusion")

EXIT_RUNTIME, EXIT_MISSING, EXIT_CONFIG = 1, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clinfusion",
                                     description="Multimodal vitals + clinical-text mortality pipeline.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI experiment config, or the preset name 'desk'")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    common.add_argument("--master-seed", type=int, default=None,
                        help="drive cohort, embedding, training and t-SNE seeds from one value")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="generate a synthetic cohort into paths.data_dir")
    sub.add_parser("preprocess", parents=[common], help="discretize vitals, split cohort, build day documents")
    p = sub.add_parser("embed", parents=[common], help="train Doc2VecC and embed day documents")
    p.add_argument("--mode", choices=("note", "entity"), required=True)
    p = sub.add_parser("train", parents=[common], help="multi-seed training of the configured row")
    p.add_argument("--jobs", type=int, default=None, help="parallel worker processes")
    sub.add_parser("evaluate", parents=[common], help="bootstrap evaluation of the selected run")
    p = sub.add_parser("tsne", parents=[common], help="t-SNE of the day embeddings")
    p.add_argument("--mode", choices=("note", "entity"), default="entity")
    sub.add_parser("report", parents=[common], help="aggregate evaluation reports into a table")
    return parser


def echo_config(cfg: ExperimentConfig, overrides) -> None:
    for item in overrides:
        log.info("override %s", item)
    print(json.dumps(flat_sections(cfg), sort_keys=True, default=str), file=sys.stderr)


def dispatch(args, cfg: ExperimentConfig):
    cmd = args.command
    if cmd == "synth":
        return experiment.run_synth(cfg)
    if cmd == "preprocess":
        return experiment.run_preprocess(cfg)
    if cmd == "embed":
        res = experiment.run_embed(cfg, args.mode)
        return {k: v for k, v in res.items() if k != "loss_history"}
    if cmd == "train":
        res = experiment.run_train(cfg, args.jobs)
        return {"row_id": res["row_id"], "selected_seed": res["selected_seed"],
                "n_failed": sum(r["failed"] for r in res["runs"])}
    if cmd == "evaluate":
        return json.loads(experiment.run_evaluate(cfg).to_json())
    if cmd == "tsne":
        return experiment.run_tsne(cfg, args.mode)
    if cmd == "report":
        return experiment.run_report(cfg)
    raise AssertionError(cmd)


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CLINFUSION_LOG_LEVEL", "INFO").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.master_seed is not None:
            cfg = with_master_seed(cfg, args.master_seed)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"error: invalid config field {exc.field}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    echo_config(cfg, args.overrides)
    try:
        out = dispatch(args, cfg)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename or exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"error: invalid config field {exc.field}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ClinFusionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if isinstance(out, str):
        sys.stdout.write(out)
    else:
        print(json.dumps(out, indent=2, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
