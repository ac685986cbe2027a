"""Common randomness over receiver-decomposable two-way channels.

Protocol simulation for the binary BSC family, entropy bookkeeping, and a
numerical search for the outer bound on common-randomness capacity.
"""
from .auxdist import AuxDist, cardinality_caps
from .bounds import (ABCD, BoundConfig, BoundReport, CapError, NotDecomposing, abcd,
                     brute_force_abcd, dominance_check, outer_bound, va_capacity, va_search)
from .channel import BscTwoWayParams, ChannelError, RdChannel, bsc, is_decomposing, load_channel
from .protocols import PROTOCOL_IDS, ProtocolMismatch, ProtocolSpec
from .simulator import CrOutcome, CrStats, converse_audit, evaluate, run_session, run_sessions

__version__ = "0.1.0"

__all__ = [
    "ABCD", "AuxDist", "BoundConfig", "BoundReport", "BscTwoWayParams", "CapError",
    "ChannelError", "CrOutcome", "CrStats", "NotDecomposing", "PROTOCOL_IDS",
    "ProtocolMismatch", "ProtocolSpec", "RdChannel", "abcd", "brute_force_abcd", "bsc",
    "cardinality_caps", "converse_audit", "dominance_check", "evaluate", "is_decomposing",
    "load_channel", "outer_bound", "run_session", "run_sessions", "va_capacity", "va_search",
]
