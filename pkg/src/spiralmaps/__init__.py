"""Extremal spiral maps of finite distortion: exact constructions and numerical checks."""

from .analysis import (
    PairSampler,
    distortion_lp_norm,
    eval_map,
    holder_lower_exponent,
    lifted_rotation,
    qc_rotation_check,
    spiral_rate,
    spiral_trace,
    verify_main_1,
    verify_main_p,
    winding_number,
)
from .blocks import (
    Annulus,
    BlockParams,
    block_differential_norm,
    block_distortion,
    block_jacobian,
    fd_oracle,
    rotation_block_eval,
    stretch_block_eval,
)
from .construct import (
    GaugeFunction,
    LambdaSequence,
    RadialMap,
    RadiusSchedule,
    TargetModulus,
    build_rotation,
    build_schedule,
    build_submain_1,
    build_submain_p,
    compose_radial,
    distortion_field,
    params_pure_rotation,
    params_submain_1,
    params_submain_p,
    series_certificate,
)
from .exceptions import ConstraintViolation, ConvergenceError, SpiralMapsError, ValidationError
from .modulus import (
    PathFamily,
    ball_chain_density,
    check_modulus_inequality,
    discrete_modulus,
    tube_density,
    weighted_energy,
    winding_lower_bound,
)

__all__ = [
    "PairSampler", "distortion_lp_norm", "eval_map", "holder_lower_exponent", "lifted_rotation",
    "qc_rotation_check", "spiral_rate", "spiral_trace", "verify_main_1", "verify_main_p", "winding_number",
    "Annulus", "BlockParams", "block_differential_norm", "block_distortion", "block_jacobian", "fd_oracle",
    "rotation_block_eval", "stretch_block_eval",
    "GaugeFunction", "LambdaSequence", "RadialMap", "RadiusSchedule", "TargetModulus", "build_rotation",
    "build_schedule", "build_submain_1", "build_submain_p", "compose_radial", "distortion_field",
    "params_pure_rotation", "params_submain_1", "params_submain_p", "series_certificate",
    "ConstraintViolation", "ConvergenceError", "SpiralMapsError", "ValidationError",
    "PathFamily", "ball_chain_density", "check_modulus_inequality", "discrete_modulus", "tube_density",
    "weighted_energy", "winding_lower_bound",
]
