"""Vision-guided MPC regulation toolkit for a 3-DOF articulated arm."""

from armmpc.errors import (
    ArmMpcError,
    AxisSingular,
    ConfigError,
    Diverged,
    IllConditioned,
    ImageFormatError,
    LimitViolation,
    NeverSettled,
    NoDetection,
    NonPositiveInput,
    NotPositiveDefinite,
    Unreachable,
)

__version__ = "0.1.0"

__all__ = [
    "ArmMpcError",
    "AxisSingular",
    "ConfigError",
    "Diverged",
    "IllConditioned",
    "ImageFormatError",
    "LimitViolation",
    "NeverSettled",
    "NoDetection",
    "NonPositiveInput",
    "NotPositiveDefinite",
    "Unreachable",
]
