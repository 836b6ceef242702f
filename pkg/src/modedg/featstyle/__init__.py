"""
Feature-statistics style mixing.
"""

from .stats import EPSILON, ChannelStats, apply_stats, channel_stats, mix_stats

__all__ = [
    "EPSILON",
    "ChannelStats",
    "channel_stats",
    "mix_stats",
    "apply_stats",
]
