"""Simulation harness: streams, scenario configs, the epoch loop, metrics, CLI."""

from .streams import (
    StreamBatch,
    Normalization,
    Stream,
    SynthConfig,
    OutlierSpec,
    load_grid_dataset,
    synth_stream,
    inject_outliers,
    write_synthetic_weather_csv,
)
from .metrics import (
    MetricsRecord,
    rmse,
    npll,
    wasserstein2_gaussians,
    write_metrics_csv,
    read_metrics_csv,
)
from .config import (
    ConfigError,
    EvalConfig,
    GridFileSource,
    SyntheticSource,
    Scenario,
    load_config,
    load_scenario,
    scenario_from_dict,
    resolved_yaml,
)
from .runner import (
    RunError,
    RunResult,
    materialize_stream,
    run_scenario,
    save_snapshot,
    load_snapshot,
)

__all__ = [
    "StreamBatch",
    "Normalization",
    "Stream",
    "SynthConfig",
    "OutlierSpec",
    "load_grid_dataset",
    "synth_stream",
    "inject_outliers",
    "write_synthetic_weather_csv",
    "MetricsRecord",
    "rmse",
    "npll",
    "wasserstein2_gaussians",
    "write_metrics_csv",
    "read_metrics_csv",
    "ConfigError",
    "EvalConfig",
    "GridFileSource",
    "SyntheticSource",
    "Scenario",
    "load_config",
    "load_scenario",
    "scenario_from_dict",
    "resolved_yaml",
    "RunError",
    "RunResult",
    "materialize_stream",
    "run_scenario",
    "save_snapshot",
    "load_snapshot",
]
