"""Neural video portrait relighting."""

from ._core import (
    CheckpointError,
    ConfigError,
    Error,
    EvaluationError,
    FormatError,
    InvariantError,
    Relighter,
    Sequence,
    ShapeError,
    log_light_distance,
    masked_metrics,
    preset,
    preset_names,
    project_point_light,
    psnr_from_rmse,
    read_png,
    rotate_light,
    write_png,
)

__all__ = [
    "CheckpointError",
    "ConfigError",
    "Error",
    "EvaluationError",
    "FormatError",
    "InvariantError",
    "Relighter",
    "Sequence",
    "ShapeError",
    "log_light_distance",
    "masked_metrics",
    "preset",
    "preset_names",
    "project_point_light",
    "psnr_from_rmse",
    "read_png",
    "rotate_light",
    "write_png",
]
