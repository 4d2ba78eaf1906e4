"""Stochastic iterative regularization: IRSGD, Landweber variants, stopping rules."""

import json as _json

from ._core import (
    ConfigError,
    DimensionError,
    LinearSystem,
    RngStream,
    SchlierenSystem,
    add_relative_noise,
    argmin_psi,
    big_M,
    build_linear_system,
    build_schlieren_system,
    c_rho,
    elliptic_solve,
    execute,
    helmholtz_apply,
    initial_image,
    irsgd_step,
    landweber_step,
    psi,
    psnr,
    relative_error,
    sample_target,
    sgd_step,
    shepp_logan,
    ssim,
)
from ._core import validate_constants_json as _validate_constants_json


def validate_constants(**inputs):
    """Theory-constants report as a dict; keyword names match the report fields."""
    return _json.loads(_validate_constants_json(inputs))


__all__ = [
    "ConfigError",
    "DimensionError",
    "LinearSystem",
    "RngStream",
    "SchlierenSystem",
    "add_relative_noise",
    "argmin_psi",
    "big_M",
    "build_linear_system",
    "build_schlieren_system",
    "c_rho",
    "elliptic_solve",
    "execute",
    "helmholtz_apply",
    "initial_image",
    "irsgd_step",
    "landweber_step",
    "psi",
    "psnr",
    "relative_error",
    "sample_target",
    "sgd_step",
    "shepp_logan",
    "ssim",
    "validate_constants",
]
