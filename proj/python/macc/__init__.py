"""Python bindings for the MaCC surrogate pipeline."""

from ._macc import (
    ConfigError,
    Error,
    MissingArtifactError,
    canonical_config,
    config_hash,
    lhs_sample,
    predict,
    run_stage,
    simulate,
    stages,
)

__all__ = [
    "ConfigError",
    "Error",
    "MissingArtifactError",
    "canonical_config",
    "config_hash",
    "lhs_sample",
    "predict",
    "run_stage",
    "simulate",
    "stages",
]
