"""Multi-trial aggregation into SR/OT/OTS/PT/ET/TLS rows."""

from __future__ import annotations

import logging
import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from ..executor import BUDGET, EpisodeConfig, FailureClass, run_episode
from .scenarios import TaskSpec, generate_scenario

log = logging.getLogger(__name__)

METRICS = ("SR", "OT", "OTS", "PT", "ET", "TLS")


@dataclass(frozen=True)
class TrialRecord:
    """What one episode contributes to a metrics row."""

    seed: int
    success: bool
    overall_time: float
    planning_time: float
    execution_time: float
    trajectory_length: float
    failure_class: FailureClass | None = None


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    method: str
    SR: float
    OT: float
    OTS: float | None
    PT: float | None
    ET: float | None
    TLS: float | None
    trials: int
    failure_histogram: dict[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.SR <= 1.0:
            raise ValueError("SR must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("a row needs at least one trial")

    def metrics(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in METRICS}


def _mean(values: Sequence[float]) -> float | None:
    return math.fsum(values) / len(values) if values else None


def aggregate(
    records: Iterable[TrialRecord], scenario: str, method: str, budget: float = BUDGET
) -> MetricsRow:
    """Fold trial records into one row; the result does not depend on record order.

    Failed trials contribute exactly ``budget`` to OT and nothing to the
    success-only means, which are None when no trial succeeded.
    """
    records = sorted(records, key=lambda r: r.seed)
    if not records:
        raise ValueError("cannot aggregate zero trials")
    wins = [r for r in records if r.success]
    n = len(records)
    histogram = Counter(
        (r.failure_class or FailureClass.INTRA_SKILL).value for r in records if not r.success
    )
    return MetricsRow(
        scenario=scenario,
        method=method,
        SR=len(wins) / n,
        OT=math.fsum(r.overall_time if r.success else budget for r in records) / n,
        OTS=_mean([r.overall_time for r in wins]),
        PT=_mean([r.planning_time for r in wins]),
        ET=_mean([r.execution_time for r in wins]),
        TLS=_mean([r.trajectory_length for r in wins]),
        trials=n,
        failure_histogram=dict(sorted(histogram.items())),
    )


def method_label(cfg: EpisodeConfig) -> str:
    return f"{cfg.backend.value}:{cfg.ablation.value}"


def run_trial(spec: TaskSpec, cfg: EpisodeConfig) -> tuple[TrialRecord, str]:
    """One seeded episode; any exception becomes an IntraSkillFailure at the budget."""
    try:
        result = run_episode(generate_scenario(spec), cfg)
    except Exception:
        log.exception("episode %s seed %d crashed", spec.label, spec.seed)
        record = TrialRecord(spec.seed, False, cfg.budget, 0.0, 0.0, 0.0, FailureClass.INTRA_SKILL)
        return record, ""
    record = TrialRecord(
        seed=spec.seed,
        success=result.success,
        overall_time=result.overall_time,
        planning_time=result.planning_time,
        execution_time=result.execution_time,
        trajectory_length=result.trajectory_length,
        failure_class=result.failure_class,
    )
    return record, result.trace.to_jsonl()


def _trial_job(job: tuple[TaskSpec, EpisodeConfig]) -> tuple[TrialRecord, str]:
    return run_trial(*job)


def run_suite(
    specs: Sequence[TaskSpec],
    trials: int,
    cfg: EpisodeConfig = EpisodeConfig(),
    workers: int | None = None,
    trace_dir: str | os.PathLike | None = None,
) -> list[MetricsRow]:
    """Run ``trials`` episodes per spec with seeds ``spec.seed + i`` and aggregate them.

    ``workers`` sizes the process pool; 1 runs everything in-process.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    jobs = []
    for spec in specs:
        for i in range(trials):
            seed = spec.seed + i
            jobs.append((replace(spec, seed=seed), replace(cfg, seed=seed)))
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        outputs = [_trial_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outputs = list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))

    if trace_dir is not None:
        root = Path(trace_dir)
        root.mkdir(parents=True, exist_ok=True)
        method = method_label(cfg).replace(":", "_")
        for (spec, _), (_, trace) in zip(jobs, outputs):
            (root / f"{spec.label}_{method}_seed{spec.seed}.jsonl").write_text(trace)

    method = method_label(cfg)
    return [
        aggregate([rec for rec, _ in outputs[k * trials:(k + 1) * trials]], spec.label, method, cfg.budget)
        for k, spec in enumerate(specs)
    ]


__all__ = ["METRICS", "MetricsRow", "TrialRecord", "aggregate", "method_label", "run_suite", "run_trial"]
