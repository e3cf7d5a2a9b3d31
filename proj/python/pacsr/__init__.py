"""Prompt-aware controllable shadow removal (PACSRNet) bindings."""

from ._pacsr import (
    ArgumentError,
    DimensionError,
    FormatError,
    Model,
    NumericError,
    dwt2,
    idwt2,
    mask_iou,
    psnr,
    rasterize,
    rmse,
    ssim,
    synth_scene,
)

__all__ = [
    "ArgumentError",
    "DimensionError",
    "FormatError",
    "Model",
    "NumericError",
    "dwt2",
    "idwt2",
    "mask_iou",
    "psnr",
    "rasterize",
    "rmse",
    "ssim",
    "synth_scene",
]
