"""Sim-to-pseudo-real adaptation testbed for a two-handed piano-playing robot."""

__version__ = "1.0.0"
