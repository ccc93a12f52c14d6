"""Class-distribution-controlled replay memory for multi-label streams."""

from .core import FrequencyTracker, MemoryBuffer, Sample, rebuild_counts
from .distributions import DistanceKind, KLDirection, distance, empirical_distribution, target_distribution
from .strategies import (
    OCDM,
    MaxDeletion,
    OnlyOne,
    RandomDeletion,
    ReservoirSampling,
    UpdateReport,
    make_strategy,
    max_update,
    ocdm_delete_argmin,
    ocdm_update,
    onlyone_update,
    random_update,
    reservoir_update,
)

__all__ = [
    "DistanceKind",
    "FrequencyTracker",
    "KLDirection",
    "MaxDeletion",
    "MemoryBuffer",
    "OCDM",
    "OnlyOne",
    "RandomDeletion",
    "ReservoirSampling",
    "Sample",
    "UpdateReport",
    "distance",
    "empirical_distribution",
    "make_strategy",
    "max_update",
    "ocdm_delete_argmin",
    "ocdm_update",
    "onlyone_update",
    "random_update",
    "rebuild_counts",
    "reservoir_update",
    "target_distribution",
]
