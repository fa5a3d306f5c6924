"""Experiment harness: metrics files, sweeps, slope fits, and the CLI."""
from .experiments import (
    ExperimentSpec,
    convergence_slope,
    convergence_study,
    run_experiment,
    tsp,
)
from .metrics import (
    CSV_SCHEMA,
    SUMMARY_SCHEMA,
    emit_run,
    read_metrics_csv,
    read_summary_json,
    result_summary,
    write_metrics_csv,
    write_rows_csv,
    write_summary_json,
)

__all__ = [
    "CSV_SCHEMA",
    "ExperimentSpec",
    "SUMMARY_SCHEMA",
    "convergence_slope",
    "convergence_study",
    "emit_run",
    "read_metrics_csv",
    "read_summary_json",
    "result_summary",
    "run_experiment",
    "tsp",
    "write_metrics_csv",
    "write_rows_csv",
    "write_summary_json",
]
