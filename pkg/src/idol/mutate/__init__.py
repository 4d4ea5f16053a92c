"""Reverse-optimization transformations over the parsed grammar subset."""

from idol.mutate.engine import (
    MutantUnit,
    Site,
    StaleSiteError,
    TransformApplication,
    TransformKind,
    apply_transform,
    discover_sites,
    mutate_unit,
)
from idol.rng import SplitMix64, mix_seed

__all__ = [
    "MutantUnit",
    "Site",
    "SplitMix64",
    "StaleSiteError",
    "TransformApplication",
    "TransformKind",
    "apply_transform",
    "discover_sites",
    "mix_seed",
    "mutate_unit",
]
