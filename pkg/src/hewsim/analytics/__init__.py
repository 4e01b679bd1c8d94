"""Metrics reduction, the saturation oracle, sweeps and the command line."""
from .metrics import MetricsRaw, NodeTally, Report, jain, reduce
from .oracle import analytic_saturation_throughput

__all__ = ["MetricsRaw", "NodeTally", "Report", "analytic_saturation_throughput", "jain", "reduce"]
