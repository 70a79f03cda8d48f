"""Friction anomaly diagnosis for reaction-wheel telemetry with switching dry-friction components."""
from .assignment import AssignmentResult, ChangepointEvent, NoFeasibleAssignment, assign, brute_force
from .changepoint import ChangepointList, DetectorConfig, calibrate_threshold, detect, wglr_profile
from .classifier import (
    AnomalyModels,
    ClassifierConfig,
    HistogramConfig,
    LinearSvmModel,
    classify,
    histogram_features,
    train_all,
    train_svm,
)
from .config import Config, PipelineConfig, default_model, example_model, load_config
from .core import (
    AnomalyStatus,
    FssSpec,
    HazardTable,
    LabeledDataset,
    RwaModel,
    TelemetryWindow,
    UnidentifiableError,
    ValidationError,
)
from .estimation import IntervalSet, SegmentedFit, build_intervals, fit
from .pipeline import DiagnosisReport, Pipeline, StageError, build_processed_dataset, diagnose
from .simulator import AnomalyEffect, Scenario, SpinProfile, make_dataset, simulate_run

__version__ = "0.1.0"

__all__ = [
    "AnomalyEffect", "AnomalyModels", "AnomalyStatus", "AssignmentResult", "ChangepointEvent",
    "ChangepointList", "ClassifierConfig", "Config", "DetectorConfig", "DiagnosisReport", "FssSpec",
    "HazardTable", "HistogramConfig", "IntervalSet", "LabeledDataset", "LinearSvmModel",
    "NoFeasibleAssignment", "Pipeline", "PipelineConfig", "RwaModel", "Scenario", "SegmentedFit",
    "SpinProfile", "StageError", "TelemetryWindow", "UnidentifiableError", "ValidationError", "assign",
    "brute_force", "build_intervals", "build_processed_dataset", "calibrate_threshold", "classify",
    "default_model", "detect", "diagnose", "example_model", "fit", "histogram_features", "load_config",
    "make_dataset", "simulate_run", "train_all", "train_svm", "wglr_profile",
]
