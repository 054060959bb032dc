"""Markov-chain anomaly detection for wireless sensor network telemetry."""

__version__ = "0.1.0"

from .baselines import ZScoreDetector, fit_zscore, score_zscore
from .discretize import QuantileBinner, assign_state, encode_series, fit_bins
from .evaluation import LabelSet, MetricsReport, confusion, metrics, node_anomaly_rates, rank_nodes
from .ingestion import NodeSeries, SensorRecord, build_series, parse_record, read_log
from .markov import (AnomalyFlag, DetectionReport, DetectorConfig, Model, TransitionMatrix,
                     build_transition_matrix, calculate_likelihood, detect, load_model, save_model)
from .synthesis import MOTE6_TPM, ChainSpec, InjectionPlan, inject, sample_chain

__all__ = [
    "AnomalyFlag", "ChainSpec", "DetectionReport", "DetectorConfig", "InjectionPlan", "LabelSet",
    "MOTE6_TPM", "MetricsReport", "Model", "NodeSeries", "QuantileBinner", "SensorRecord",
    "TransitionMatrix", "ZScoreDetector", "assign_state", "build_series", "build_transition_matrix",
    "calculate_likelihood", "confusion", "detect", "encode_series", "fit_bins", "fit_zscore",
    "inject", "load_model", "metrics", "node_anomaly_rates", "parse_record", "rank_nodes",
    "read_log", "sample_chain", "save_model", "score_zscore",
]
