"""Fog-computing traffic-signal simulator.

A deterministic discrete-event model of a cloud -> proxy -> fog node -> camera/LED
deployment driving an adaptive intersection controller, with fixed-cycle and
connected-vehicle baselines for comparison.
"""

from fogsignal.config import ScenarioConfig, default_config
from fogsignal.simulation import Simulation, run_scenario

__all__ = ["ScenarioConfig", "Simulation", "default_config", "run_scenario"]
__version__ = "0.1.0"
