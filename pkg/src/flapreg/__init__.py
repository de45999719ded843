"""Linkage-length thrust regulation toolkit for a flapping-wing robot."""

__version__ = "0.1.0"
