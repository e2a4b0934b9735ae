"""Batch scan harness: config parsing, experiment drivers, fits, CSV/SVG output."""

from .config import ScanConfig, load_config, parse_config_text
from .experiments import run
from .fitting import FitResult, loglog_fit

__all__ = ["ScanConfig", "load_config", "parse_config_text", "run", "FitResult",
           "loglog_fit"]
