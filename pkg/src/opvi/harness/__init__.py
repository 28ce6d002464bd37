from opvi.harness.config import ExperimentConfig, config_echo, load_config, parse_config_text
from opvi.harness.runner import RunResult, run_experiment, trace_to_csv_text
from opvi.harness.compare import compare_runs, format_comparison
from opvi.harness.plotting import emit_scatter_svg

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config_text",
    "config_echo",
    "RunResult",
    "run_experiment",
    "trace_to_csv_text",
    "compare_runs",
    "format_comparison",
    "emit_scatter_svg",
]
