"""Simulator and analysis tools for cache-enabled dual-mode MIMO interference networks."""

from .config import PRESETS, SimConfig
from .core import ConfigError, RngStreams, UnitContext, build_topology, convert_rate
from .harness import MetricsReport, run_simulation, sweep

__all__ = [
    "PRESETS",
    "ConfigError",
    "MetricsReport",
    "RngStreams",
    "SimConfig",
    "UnitContext",
    "build_topology",
    "convert_rate",
    "run_simulation",
    "sweep",
]

__version__ = "0.1.0"
