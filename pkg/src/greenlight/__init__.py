"""Adaptive traffic-signal scheduling toolkit.

Turns per-camera vehicle detections into optimized signal cycles with a
two-objective NSGA-II (residual congestion, total red time), streams
detections through a latest-frame pipeline with a full latency ledger, and
evaluates controllers in a deterministic queueing microsimulator.
"""

__version__ = "0.1.0"

from .core import (
    ConfigError,
    DetectionRecord,
    IntersectionConfig,
    LinkId,
    ObjectiveVector,
    QueueState,
    SignalPlan,
    load_intersection_config,
    validate_plan,
)

__all__ = [
    "ConfigError",
    "DetectionRecord",
    "IntersectionConfig",
    "LinkId",
    "ObjectiveVector",
    "QueueState",
    "SignalPlan",
    "load_intersection_config",
    "validate_plan",
    "__version__",
]
