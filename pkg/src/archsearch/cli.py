"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 evaluator failure
threshold exceeded.  The ARCHSEARCH_LOG environment variable (debug | info |
warning | error) controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import shlex
import sys
from pathlib import Path

from . import engine
from .complexity import estimate_flops
from .errors import ArchSearchError, EvaluatorFailureThreshold, ValidationError
from .evaluation import EvaluationBudget, SurrogateSpec, TrainerEndpoint
from .space import (
    genotype_from_dict,
    genotype_to_dict,
    load_genotype,
    load_space,
    sample_uniform,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_EVALUATOR = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        raise SystemExit2(message)


class SystemExit2(Exception):
    pass


def _configure_logging() -> None:
    level_name = os.environ.get("ARCHSEARCH_LOG", "warning").upper()
    level = getattr(logging, level_name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _build_parser() -> _Parser:
    parser = _Parser(prog="archsearch", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_search = sub.add_parser("search", help="run one architecture search")
    p_search.add_argument("--config", required=True, help="run config JSON file")
    p_search.add_argument("--strategy", help="override the configured strategy")
    p_search.add_argument("--trials", type=int, help="override the trial count")
    p_search.add_argument("--seed", type=int, help="override the run seed")
    p_search.add_argument("--evaluator",
                          help="override: surrogate:<kind> or subprocess:<command>")
    p_search.add_argument("--output-dir", help="override the output directory")

    p_report = sub.add_parser("report", help="aggregate finished runs")
    p_report.add_argument("--runs", nargs="+", required=True, help="run directories")
    p_report.add_argument("--format", choices=("table", "csv", "scatter-data"),
                          default="table")
    p_report.add_argument("--top-k", type=int, default=3)

    p_flops = sub.add_parser("flops", help="estimate forward-pass FLOPs")
    p_flops.add_argument("--genotype", required=True, help="genotype JSON file")
    p_flops.add_argument("--shape", required=True, help="input shape JSON file")

    p_space = sub.add_parser("space", help="search-space utilities")
    space_sub = p_space.add_subparsers(dest="space_command", required=True)
    p_sample = space_sub.add_parser("sample", help="sample genotypes uniformly")
    p_sample.add_argument("--space", required=True, help="space JSON file")
    p_sample.add_argument("--n", type=int, default=1)
    p_sample.add_argument("--seed", type=int, default=0)

    p_cv = sub.add_parser("cv", help="cross-validate genotypes via a trainer")
    p_cv.add_argument("--genotypes", required=True, help="JSONL file of genotypes")
    p_cv.add_argument("--trainer", required=True, help="trainer command line")
    p_cv.add_argument("--folds", type=int, default=5)
    p_cv.add_argument("--dataset", default="default")
    p_cv.add_argument("--session", action="store_true",
                      help="keep one trainer process across folds")
    p_cv.add_argument("--timeout", type=float, default=600.0)
    return parser


def _apply_overrides(config: engine.RunConfig, args: argparse.Namespace) -> engine.RunConfig:
    from dataclasses import replace

    updates: dict = {}
    if args.strategy:
        updates["strategy"] = args.strategy
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.output_dir:
        updates["output_dir"] = args.output_dir
    if args.evaluator:
        updates["evaluator"] = _parse_evaluator(args.evaluator, config,
                                                args.seed if args.seed is not None
                                                else config.seed)
    return replace(config, **updates) if updates else config


def _parse_evaluator(spec: str, config: engine.RunConfig, seed: int):
    kind, _, rest = spec.partition(":")
    if kind == "surrogate":
        surrogate_kind = rest or "distance"
        # The hidden optimum defaults to a uniform sample derived from the
        # run seed, so the same seed always means the same landscape.
        target = sample_uniform(engine.project_space(config), seed * 7919 + 17)
        return SurrogateSpec(kind=surrogate_kind, space=engine.project_space(config),
                             target=target)
    if kind == "subprocess":
        if not rest:
            raise ValidationError("subprocess evaluator needs a command")
        return TrainerEndpoint(command=tuple(shlex.split(rest)),
                               input_shape=config.input_shape)
    raise ValidationError(f"unknown evaluator spec {spec!r}")


def _cmd_search(args: argparse.Namespace) -> int:
    config = engine.config_from_dict(json.loads(Path(args.config).read_text()))
    config = _apply_overrides(config, args)
    record = engine.run_search(config)
    best = record.best
    if best is None:
        print(f"run finished: {len(record.trials)} trials, no successful trial")
    else:
        print(f"run finished: {len(record.trials)} trials, "
              f"best objective {best.objective:.6g} (trial {best.trial_id}, "
              f"{best.flops} FLOPs)")
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    sys.stdout.write(engine.report(args.runs, args.format, args.top_k))
    return EXIT_OK


def _cmd_flops(args: argparse.Namespace) -> int:
    g = load_genotype(args.genotype)
    shape_doc = json.loads(Path(args.shape).read_text())
    shape = engine._shape_from_dict(shape_doc)
    breakdown = estimate_flops(g, shape)
    print(json.dumps(
        {"total": breakdown.total,
         "per_block": [{"block": name, "flops": count}
                       for name, count in breakdown.per_block]},
        indent=2))
    return EXIT_OK


def _cmd_space_sample(args: argparse.Namespace) -> int:
    space = load_space(args.space)
    rng_seed = args.seed
    import numpy as np

    rng = np.random.default_rng(rng_seed)
    for _ in range(args.n):
        print(json.dumps(genotype_to_dict(sample_uniform(space, rng)), sort_keys=True))
    return EXIT_OK


def _cmd_cv(args: argparse.Namespace) -> int:
    genotypes = []
    with open(args.genotypes, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                genotypes.append(genotype_from_dict(json.loads(line)))
    endpoint = TrainerEndpoint(command=tuple(shlex.split(args.trainer)),
                               dataset=args.dataset, session=args.session)
    entries = engine.cross_validate(genotypes, endpoint, args.folds,
                                    budget=EvaluationBudget(), timeout=args.timeout)
    for i, entry in enumerate(entries):
        flags = " (partial)" if entry.partial else ""
        formatted = entry.formatted()
        cells = "  ".join(f"{name}={formatted[name]}" for name in formatted)
        print(f"genotype {i}{flags}: {cells}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit2 as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "search":
            return _cmd_search(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "flops":
            return _cmd_flops(args)
        if args.command == "space":
            return _cmd_space_sample(args)
        if args.command == "cv":
            return _cmd_cv(args)
        return EXIT_USAGE
    except EvaluatorFailureThreshold as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except (ArchSearchError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
