from .config import (
    ConfigError,
    DEFAULT_TASKS,
    DEFAULT_TOTALS,
    ExperimentConfig,
    export_hyperparameters,
    gamma_label,
)
from .run import (
    RunError,
    cell_key,
    prefix_culture_originals,
    run_experiment,
    run_multi_round,
    write_report,
)
from . import fixtures, tasks

__all__ = [
    "ConfigError",
    "DEFAULT_TASKS",
    "DEFAULT_TOTALS",
    "ExperimentConfig",
    "RunError",
    "cell_key",
    "export_hyperparameters",
    "fixtures",
    "gamma_label",
    "prefix_culture_originals",
    "run_experiment",
    "run_multi_round",
    "tasks",
    "write_report",
]
