"""Iterative section reduction: mine route sections whose telemetry clippings
predict a 3-class driver label, vote section-specific classifiers into
ensembles, and benchmark DTW against its banded and multiresolution
approximations."""

from isr.series import CHANNEL_NAMES, MultiChannelSeries, Window
from isr.lattice import RouteLattice, Section

__all__ = [
    "CHANNEL_NAMES",
    "MultiChannelSeries",
    "Window",
    "RouteLattice",
    "Section",
]
