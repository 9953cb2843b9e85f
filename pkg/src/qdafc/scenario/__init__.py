"""End-to-end experiment scenarios driven by JSON configuration files."""

from .config import ConfigError, ScenarioConfig, load_preset, parse_config
from .runner import RunArtifacts, run
from .schedule import TimingSchedule, build_schedule

__all__ = [
    "ConfigError", "ScenarioConfig", "load_preset", "parse_config",
    "RunArtifacts", "run", "TimingSchedule", "build_schedule",
]
