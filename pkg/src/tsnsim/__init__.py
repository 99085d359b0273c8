"""Discrete-event simulator of a smart-factory TSN network with edge-compressed AR video."""

from .engine import MS, NS, S, US, SimulationError, Simulator, parse_duration
from .frames import App, ConfigError, Frame, serialization_time
from .scenario import PRESETS, ScenarioConfig, expand_preset, run, sweep

__version__ = "0.1.0"

__all__ = ["App", "ConfigError", "Frame", "MS", "NS", "PRESETS", "S", "ScenarioConfig",
           "SimulationError", "Simulator", "US", "expand_preset", "parse_duration", "run",
           "serialization_time", "sweep"]
