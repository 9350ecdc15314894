"""Occlusion-aware single-object tracking on top of a promptable mask predictor."""

from .config import Config, ConfigError, load_config
from .core import MaskGeometry, ObjectPointer, PredictorOutput, TrackingMode
from .runner import RunMetrics, compute_metrics, run_batch, run_sequence
from .sim import SimPredictor, generate, load_script, save_script
from .tracker import Ablation, Tracker

__all__ = [
    "Ablation", "Config", "ConfigError", "MaskGeometry", "ObjectPointer", "PredictorOutput",
    "RunMetrics", "SimPredictor", "Tracker", "TrackingMode", "compute_metrics", "generate",
    "load_config", "load_script", "run_batch", "run_sequence", "save_script",
]
__version__ = "0.1.0"
