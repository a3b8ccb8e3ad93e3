"""Two-stage graph-contrastive reviewer recommendation on sparse bipartite graphs."""
from .config import TrainConfig
from .errors import ArtifactMismatch, InputError, NumericalError, RevGNNError, ShapeError
from .evalkit import RankingContext, RankingReport, emit_report, evaluate, mann_whitney_u
from .graphstore import (BipartiteGraph, DatasetStats, FeatureStore, PreparedData, compute_stats,
                         load_edges, load_features, load_prepared, make_split, prepare)
from .trainer import RevGNN, Trainer, fit

__all__ = [
    "ArtifactMismatch", "BipartiteGraph", "DatasetStats", "FeatureStore", "InputError",
    "NumericalError", "PreparedData", "RankingContext", "RankingReport", "RevGNN", "RevGNNError",
    "ShapeError", "TrainConfig", "Trainer", "compute_stats", "emit_report", "evaluate", "fit",
    "load_edges", "load_features", "load_prepared", "make_split", "mann_whitney_u", "prepare",
]
