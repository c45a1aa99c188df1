"""Concurrent partial snapshots (CPS) with a CSS baseline, a round simulator and a causal checker."""

from .cps import CpsNode
from .css import CssNode
from .events import Event, EventLog
from .messages import AppState, CheckpointRecord, Envelope, InstanceId, Kind, MessageCategory, classify
from .metrics import RunMetrics, initiator_network_stats, top_k_load
from .sim import RoundLimitExceeded, Scenario, Simulator, WorkloadConfig, run

__all__ = [
    "AppState", "CheckpointRecord", "CpsNode", "CssNode", "Envelope", "Event", "EventLog",
    "InstanceId", "Kind", "MessageCategory", "RoundLimitExceeded", "RunMetrics", "Scenario",
    "Simulator", "WorkloadConfig", "classify", "initiator_network_stats", "run", "top_k_load",
]
