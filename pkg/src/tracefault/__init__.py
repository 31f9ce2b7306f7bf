"""Failure analysis of fault-injection campaigns by diffing event traces.

Faulty traces are aligned against their closest fault-free trace (LCS); each
difference is then scored by a variable-order Markov model of normal behavior,
and experiments are grouped into failure modes by K-Medoids over anomaly counts.
"""

__version__ = "0.1.0"

from .alignment import LcsDiff, diff, lcs_length, nlcs, select_reference
from .clustering import ClusterResult, FeatureVector, build_vectors, kmedoids, purity, select_k, silhouette
from .detector import (
    AnomalyReport,
    Label,
    Metrics,
    Representation,
    Thresholds,
    analyze_campaign,
    analyze_experiment,
    score_metrics,
)
from .trace_model import Event, SymbolSequence, SymbolTable, Trace, TraceKind
from .vmm import VmmModel, train

__all__ = [
    "AnomalyReport", "ClusterResult", "Event", "FeatureVector", "Label", "LcsDiff", "Metrics",
    "Representation", "SymbolSequence", "SymbolTable", "Thresholds", "Trace", "TraceKind", "VmmModel",
    "analyze_campaign", "analyze_experiment", "build_vectors", "diff", "kmedoids", "lcs_length",
    "nlcs", "purity", "score_metrics", "select_k", "select_reference", "silhouette", "train",
]
