"""ANDA / MultiANDA transfer attacks on small classifiers (C++ core)."""

from ._anda import (
    AndaError,
    AttackConfig,
    ConfigError,
    DataError,
    InvariantError,
    Model,
    ShapeError,
    TrainingDiverged,
    anda,
    attack_batch,
    bim,
    generate_synthetic,
    multianda,
    read_archive,
    sample_perturbation,
    translate,
    translate_adjoint,
    translation_offsets,
)

__all__ = [
    "AndaError",
    "AttackConfig",
    "ConfigError",
    "DataError",
    "InvariantError",
    "Model",
    "ShapeError",
    "TrainingDiverged",
    "anda",
    "attack_batch",
    "bim",
    "generate_synthetic",
    "multianda",
    "read_archive",
    "sample_perturbation",
    "translate",
    "translate_adjoint",
    "translation_offsets",
]
