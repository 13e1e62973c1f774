from .config import BenchConfig, ConfigError, config_from_dict, load_config
from .export import ExportError, export_report, export_trajectory, import_trajectory
from .harness import RunMetrics, RunReport, aggregate, compute_metrics, run_benchmark, scaling_sweep

__all__ = [
    "BenchConfig",
    "ConfigError",
    "ExportError",
    "RunMetrics",
    "RunReport",
    "aggregate",
    "compute_metrics",
    "config_from_dict",
    "export_report",
    "export_trajectory",
    "import_trajectory",
    "load_config",
    "run_benchmark",
    "scaling_sweep",
]
