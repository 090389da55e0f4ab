"""Maximum-information selection of consistent Schmidt-projection histories."""

from .hilbert import StateVector, TensorSplit, schmidt_decompose
from .histories import HistorySet, consistency_check, decoherence_matrix, shannon_information
from .selection import max_info_select, montecarlo_stats
from .spinmodel import SpinModelConfig

__all__ = [
    "HistorySet",
    "SpinModelConfig",
    "StateVector",
    "TensorSplit",
    "consistency_check",
    "decoherence_matrix",
    "max_info_select",
    "montecarlo_stats",
    "schmidt_decompose",
    "shannon_information",
]
