"""Discrete-event simulator for dense 802.11ax-style WLAN deployments."""
from .scenario import Scenario, builtin_scenario, parse_scenario, render_scenario, validate

__version__ = "0.1.0"
__all__ = ["Scenario", "builtin_scenario", "parse_scenario", "render_scenario", "validate"]
