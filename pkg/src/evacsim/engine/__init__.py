"""Scenario loading, the simulation loop, and run summaries."""

from .run import EventLog, Simulation, SimulationResult, run, visual_cues
from .scenario import ConfigError, Scenario, load_scenario
from .summary import summarize, summarize_result, write_summary

__all__ = [
    "ConfigError", "EventLog", "Scenario", "Simulation", "SimulationResult", "load_scenario", "run",
    "summarize", "summarize_result", "visual_cues", "write_summary",
]
