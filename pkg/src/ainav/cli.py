"""Command line entry point: ``ainav run``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from typing import Sequence

from .agents.remote import ENV_KEY, EndpointConfig
from .bench.metrics import run_suite
from .bench.report import ReportError, ReportFormat, emit_report, render
from .bench.scenarios import Difficulty, Task, TaskSpec
from .executor import Ablation, BackendKind, EpisodeConfig

EXIT_OK = 0
EXIT_CONFIG = 2

log = logging.getLogger("ainav")


class ConfigError(ValueError):
    pass


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ainav", description="Interactive navigation benchmark runner.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser(
        "run",
        help="run seeded trials and report SR/OT/OTS/PT/ET/TLS",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    tasks = [t.value for t in Task] + ["all"]
    run.add_argument("--task", choices=tasks, default=Task.BOX_OBSTRUCTION.value, help="task family")
    run.add_argument("--difficulty", choices=[d.value for d in Difficulty] + ["all"], default="M", help="difficulty level")
    run.add_argument("--trials", type=int, default=10, help="trials per scenario; trial i uses seed+i")
    run.add_argument("--backend", choices=[b.value for b in BackendKind], default=BackendKind.RULE.value,
                     help=f"planner backend; remote reads its key from {ENV_KEY}")
    run.add_argument("--seed", type=int, default=0, help="first seed")
    run.add_argument("--gamma", type=float, default=0.9, help="discount for value backpropagation, in (0, 1]")
    run.add_argument("--ablation", choices=[a.value for a in Ablation], default=Ablation.NONE.value,
                     help="planner variant")
    run.add_argument("--budget", type=float, default=120.0, help="simulated seconds per trial")
    run.add_argument("--report", default=None, help="report path; format follows the extension (.csv, .json, .md)")
    run.add_argument("--format", choices=[f.value for f in ReportFormat], default=None,
                     help="report format, overriding the extension")
    run.add_argument("--trace-dir", default=None, help="directory for per-trial JSONL traces")
    run.add_argument("--workers", type=int, default=None, help="worker processes (default: one per CPU)")
    run.add_argument("--log-level", default="WARNING", help="logging level")
    return parser


def _specs(args: argparse.Namespace) -> list[TaskSpec]:
    tasks = list(Task) if args.task == "all" else [Task(args.task)]
    levels = list(Difficulty) if args.difficulty == "all" else [Difficulty(args.difficulty)]
    return [TaskSpec(t, d, args.seed) for t in tasks for d in levels]


def _config(args: argparse.Namespace) -> EpisodeConfig:
    if args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    if args.workers is not None and args.workers < 1:
        raise ConfigError("--workers must be at least 1")
    try:
        cfg = EpisodeConfig(
            gamma=args.gamma, seed=args.seed, backend=args.backend, ablation=args.ablation, budget=args.budget
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.backend == BackendKind.REMOTE and not EndpointConfig.from_env().api_key:
        raise ConfigError(f"the remote backend needs {ENV_KEY}")
    return cfg


def run(args: argparse.Namespace) -> int:
    try:
        cfg = _config(args)
    except ConfigError as exc:
        print(f"ainav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    started = time.perf_counter()
    rows = run_suite(_specs(args), args.trials, cfg, workers=args.workers, trace_dir=args.trace_dir)
    sys.stdout.write(render(rows, ReportFormat.MARKDOWN))
    if args.report:
        try:
            path = emit_report(rows, args.report, args.format)
        except ReportError as exc:
            print(f"ainav: config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"report written to {path}", file=sys.stderr)
    log.info("suite finished in %.2f s", time.perf_counter() - started)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
