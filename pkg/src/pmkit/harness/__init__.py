"""Experiment orchestration."""
from .monitor import MonitorReport, MonitorRow, f1_score, monitor_experiment, monitor_run, wald_budget
from .runner import ExperimentSummary, RunRecord, StrategyStats, replicate, run_game, summarize, welch_one_sided

__all__ = [
    "ExperimentSummary",
    "MonitorReport",
    "MonitorRow",
    "RunRecord",
    "StrategyStats",
    "f1_score",
    "monitor_experiment",
    "monitor_run",
    "replicate",
    "run_game",
    "summarize",
    "wald_budget",
    "welch_one_sided",
]
