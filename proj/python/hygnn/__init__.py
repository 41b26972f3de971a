"""Hybrid graph network for joint crowd counting and localization."""

from ._core import (
    CheckpointError,
    ConfigError,
    DataError,
    LossReduction,
    Model,
    NumericalError,
    Scene,
    TrainConfig,
    Trainer,
    density_map,
    flip_horizontal,
    grad_check,
    load_checkpoint,
    load_config,
    load_dataset,
    load_scene,
    localization_map,
    metrics,
    parse_config,
    save_checkpoint,
    save_scene,
    synth_scene,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
