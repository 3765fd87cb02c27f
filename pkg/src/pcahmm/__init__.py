"""Bearing degradation detection with window PCA features and a Gaussian HMM.

Train on the healthy part of a run-to-failure record, then score every
snapshot by its log-likelihood under the learned model and alarm when the
z-score against the healthy baseline falls below the threshold.
"""
from ._kernels import BACKEND
from .config import PipelineConfig, load_config
from .detector import FaultDetector, HealthBaseline, HealthVerdict, TrainingRange, select_training_range, train_detector
from .hmm import HmmModel, baum_welch, forward_loglik, viterbi
from .pca import ProjectionMatrix, fit_pca, project
from .segment import SegmentSpec, segment

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "FaultDetector",
    "HealthBaseline",
    "HealthVerdict",
    "HmmModel",
    "PipelineConfig",
    "ProjectionMatrix",
    "SegmentSpec",
    "TrainingRange",
    "baum_welch",
    "fit_pca",
    "forward_loglik",
    "load_config",
    "project",
    "segment",
    "select_training_range",
    "train_detector",
    "viterbi",
]
