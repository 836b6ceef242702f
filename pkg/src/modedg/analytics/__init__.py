"""
Benchmark drivers and result tables.
"""

from .exporters import CSVExporter, DataExporter, JSONExporter
from .reports import (
    SWEEP_AXES,
    LodoReport,
    RunResult,
    apply_axis,
    consolidate_runs,
    loss_curves,
    run_lodo,
    run_once,
    run_grid,
    run_sweep,
    write_report,
)

__all__ = [
    # Exporters
    "DataExporter",
    "CSVExporter",
    "JSONExporter",

    # Benchmarks
    "RunResult",
    "LodoReport",
    "run_once",
    "run_lodo",
    "SWEEP_AXES",
    "apply_axis",
    "run_sweep",
    "run_grid",

    # Consolidation
    "loss_curves",
    "consolidate_runs",
    "write_report",
]
