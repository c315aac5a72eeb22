"""Rate-splitting semi-grant-free uplink: protocol simulator and outage analysis."""

from .channel_model import ChannelRealization, SystemConfig, sample_realization
from .protocol import Group, SchemeKind, TransmissionOutcome, run_block

__all__ = [
    "ChannelRealization",
    "Group",
    "SchemeKind",
    "SystemConfig",
    "TransmissionOutcome",
    "run_block",
    "sample_realization",
]
