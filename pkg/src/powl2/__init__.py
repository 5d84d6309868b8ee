"""Inductive mining of POWL 2.0 models with choice graphs."""

__version__ = "0.1.0"

from .conformance import ConformanceReport, conformance_report, f_score, fitness, precision
from .discovery import DiscoveryConfig, discover
from .log import EventLog, log_stats, parse_csv, parse_xes, read_log
from .model import (
    Activity,
    ChoiceGraph,
    Loop,
    PartialOrder,
    Silent,
    deserialize,
    enumerate_language,
    is_member,
    reduce_model,
    serialize,
)
from .wfnet import check_soundness, net_language, powl_to_wfnet

__all__ = [
    "Activity", "ChoiceGraph", "ConformanceReport", "DiscoveryConfig", "EventLog", "Loop",
    "PartialOrder", "Silent", "check_soundness", "conformance_report", "deserialize",
    "discover", "enumerate_language", "f_score", "fitness", "is_member", "log_stats",
    "net_language", "parse_csv", "parse_xes", "powl_to_wfnet", "precision", "read_log",
    "reduce_model", "serialize",
]
