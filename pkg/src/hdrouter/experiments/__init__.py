"""Scenario configs, the reference experiments, file formats and the CLI."""

from .config import ConfigError, ScenarioConfig, builtin_names, load_config, parse_config
from .io import DataError, ingest_counts
from .scenarios import (NumericalError, WitnessRun, run_correlation_scan, run_longterm,
                        run_switching, run_witness)

__all__ = [
    "ConfigError", "DataError", "NumericalError", "ScenarioConfig", "WitnessRun",
    "builtin_names", "ingest_counts", "load_config", "parse_config",
    "run_correlation_scan", "run_longterm", "run_switching", "run_witness",
]
