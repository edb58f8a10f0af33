from .sweep import (
    CSV_COLUMNS,
    DEFAULT_LAMBDA_GRID,
    SweepResult,
    load_sweep_result,
    register_case,
    report,
    save_sweep_result,
    sweep,
    sweep_dataset,
    time_forward,
    write_csv,
)

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_LAMBDA_GRID",
    "SweepResult",
    "load_sweep_result",
    "register_case",
    "report",
    "save_sweep_result",
    "sweep",
    "sweep_dataset",
    "time_forward",
    "write_csv",
]
