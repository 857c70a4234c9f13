"""Desk-scale probes of hidden-layer representation content."""

from ._core import (
    Dataset,
    LinearModel,
    Model,
    __version__,
    bilinear_downsample,
    blur,
    build_linear_model,
    build_mlp,
    build_small_convnet,
    compute_metrics,
    conditioning_probe,
    epsilon_line_search,
    estimate_zero_fraction,
    forward_to_layer,
    gaussian_draw,
    input_gradient,
    invert,
    invert_linear,
    linear_forward,
    load_model,
    make_noise_dataset,
    make_structured_dataset,
    relu_capacity,
    save_model_manifest,
    save_model_params,
    shifted_input,
    train,
)

__all__ = [
    "Dataset",
    "LinearModel",
    "Model",
    "__version__",
    "bilinear_downsample",
    "blur",
    "build_linear_model",
    "build_mlp",
    "build_small_convnet",
    "compute_metrics",
    "conditioning_probe",
    "epsilon_line_search",
    "estimate_zero_fraction",
    "forward_to_layer",
    "gaussian_draw",
    "input_gradient",
    "invert",
    "invert_linear",
    "linear_forward",
    "load_model",
    "make_noise_dataset",
    "make_structured_dataset",
    "relu_capacity",
    "save_model_manifest",
    "save_model_params",
    "shifted_input",
    "train",
]
