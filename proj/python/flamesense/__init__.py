"""Flame-image soft sensor: estimate the excess air coefficient from flame frames."""

from ._core import (
    FlamesenseError,
    IdealFlameModel,
    TrainedModel,
    baseline_features,
    cubic_interp,
    extract_features,
    fit,
    gmm_weight_grid,
    mse,
    pdf_uni,
    pearson_r,
    read_image,
    render_frame,
    run_cli,
    split,
    write_png,
)

__all__ = [
    "FlamesenseError",
    "IdealFlameModel",
    "TrainedModel",
    "baseline_features",
    "cubic_interp",
    "extract_features",
    "fit",
    "gmm_weight_grid",
    "mse",
    "pdf_uni",
    "pearson_r",
    "read_image",
    "render_frame",
    "run_cli",
    "split",
    "write_png",
]
