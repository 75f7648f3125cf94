"""Bag-level classification with hypervector concept banks.

The pipeline encodes raw instances into distribution-constrained
hypervectors, discretizes them against a learned codebook, and scores
bags with a min-over-concepts / max-over-instances network whose
structure makes "positive iff some instance is positive" hold by
construction.
"""

from .data import Bag, MilDataset, assign_splits, load_jsonl, save_jsonl
from .pipeline import PipelineModel, RunConfig, evaluate_model, load_model, save_model, train_pipeline

__version__ = "0.1.0"

__all__ = [
    "Bag", "MilDataset", "assign_splits", "load_jsonl", "save_jsonl",
    "PipelineModel", "RunConfig", "evaluate_model", "load_model",
    "save_model", "train_pipeline", "__version__",
]
