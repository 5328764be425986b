"""Scenario generation, multi-trial metrics and report rendering."""

from .metrics import METRICS, MetricsRow, TrialRecord, aggregate, method_label, run_suite, run_trial
from .report import ReportError, ReportFormat, emit_report, read_report, render
from .scenarios import Difficulty, Task, TaskSpec, generate_scenario

__all__ = [
    "METRICS",
    "Difficulty",
    "MetricsRow",
    "ReportError",
    "ReportFormat",
    "Task",
    "TaskSpec",
    "TrialRecord",
    "aggregate",
    "emit_report",
    "generate_scenario",
    "method_label",
    "read_report",
    "render",
    "run_suite",
    "run_trial",
]
