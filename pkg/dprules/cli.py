# cli.py (dprules)
# !/usr/bin/env python3
# coding=utf-8
"""
Command line interface. `dprules run` executes the whole pipeline; the
stage verbs run one stage from the artifacts of the earlier ones; `dprules
generate` writes the generated example logs as CSV.

Exit codes: 0 success, 1 invalid input or configuration, 2 stage failure,
3 degenerate result.
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

from . import synthetic
from .pipeline import STAGES, PipelineConfig, run, run_stage
from .util import log, ensure_dir, ConfigurationError, DegenerateResultError, \
    DprulesError, InputError, StageError


EXIT_OK = 0
EXIT_INPUT = 1
EXIT_STAGE = 2
EXIT_DEGENERATE = 3


def _config_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--log", help="event log (.csv, .xes, .xes.gz)")
    p.add_argument("--dataset", help="registered dataset id, e.g. EXAMPLE")
    p.add_argument("--labels", help="CSV with the columns case and label")
    p.add_argument("--label-threshold", dest="label_threshold",
                   help="duration threshold, e.g. '28 days'")
    p.add_argument("--desirable-side", dest="desirable_side",
                   choices=("below", "above"))
    p.add_argument("--split-ratio", dest="split_ratio", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda-grid", dest="lambda_grid", type=float, nargs="+")
    p.add_argument("--cv-folds", dest="cv_folds", type=int)
    p.add_argument("--K", dest="K", type=int, help="number of rule clusters")
    p.add_argument("--discovery-threshold", dest="discovery_threshold",
                   type=float)
    p.add_argument("--evaluation-log", dest="evaluation_log",
                   choices=("test", "full"))
    p.add_argument("--output", help="output directory")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dprules",
        description="Discriminative rules and process models for desirable "
                    "and undesirable cases of an event log")
    p.add_argument("-v", "--verbose", action="store_true", help="debug output")
    p.add_argument("-q", "--quiet", action="store_true", help="warnings only")
    sub = p.add_subparsers(dest="cmd", required=True)
    _config_flags(sub.add_parser("run", help="run the whole pipeline"))
    for stage in STAGES:
        _config_flags(sub.add_parser(
            stage, help=f"run the {stage} stage from earlier artifacts"))
    gen = sub.add_parser("generate", help="write a generated log as CSV")
    gen.add_argument("which", choices=("example", "synthetic"))
    gen.add_argument("--output", default=".", help="target directory")
    gen.add_argument("--seed", type=int, default=0)
    return p


_CONFIG_FIELDS = ("log", "dataset", "labels", "label_threshold",
                  "desirable_side", "split_ratio", "seed", "lambda_grid",
                  "cv_folds", "K", "discovery_threshold", "evaluation_log",
                  "output")


def _generate(args) -> int:
    ensure_dir(args.output)
    if args.which == "example":
        elog, labels = synthetic.example_log()
    else:
        elog, labels = synthetic.synthetic_log(seed=args.seed)
    synthetic.write_csv(elog, labels,
                        os.path.join(args.output, f"{args.which}_log.csv"),
                        os.path.join(args.output, f"{args.which}_labels.csv"))
    log.info(f"wrote {len(elog)} traces to {args.output}")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    elif args.quiet:
        logging.getLogger().setLevel(logging.WARNING)
    try:
        if args.cmd == "generate":
            return _generate(args)
        overrides = {k: getattr(args, k) for k in _CONFIG_FIELDS}
        config = PipelineConfig.load(args.config, overrides)
        if args.cmd == "run":
            report = run(config)
        else:
            report = run_stage(config, args.cmd)
        if report is not None:
            report.check()
    except (InputError, ConfigurationError) as e:
        log.error(str(e))
        return EXIT_INPUT
    except DegenerateResultError as e:
        log.warning(str(e))
        return EXIT_DEGENERATE
    except StageError as e:
        log.error(str(e))
        return EXIT_STAGE
    except DprulesError as e:
        log.error(str(e))
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
