"""Ensemble Kalman filter with learned transition/observation/noise/sensor models.

- :mod:`iroco.denkf.models`      model bundle, layer specs, initialization
- :mod:`iroco.denkf.filtering`   ensemble state and the per-frame filter step
- :mod:`iroco.denkf.training`    end-to-end training loop
- :mod:`iroco.denkf.checkpoint`  save/load of trained models
"""

from .checkpoint import CheckpointMissing, load_checkpoint, save_checkpoint
from .filtering import (
    Ensemble,
    FilterRun,
    HistoryNotWarm,
    SolveFailure,
    StepDiagnostics,
    filter_session,
    filter_step,
    init_ensemble,
    innovation_cov,
    kalman_update,
    observe,
    predict,
    sensor_sample,
)
from .models import FilterModels, build_filter_models, default_model_specs
from .training import DataTooShort, EpochStats, TrainConfig, train

__all__ = [
    "CheckpointMissing",
    "load_checkpoint",
    "save_checkpoint",
    "Ensemble",
    "FilterRun",
    "HistoryNotWarm",
    "SolveFailure",
    "StepDiagnostics",
    "filter_session",
    "filter_step",
    "init_ensemble",
    "innovation_cov",
    "kalman_update",
    "observe",
    "predict",
    "sensor_sample",
    "FilterModels",
    "build_filter_models",
    "default_model_specs",
    "DataTooShort",
    "EpochStats",
    "TrainConfig",
    "train",
]
