"""Biased random walks on random interlacements of Z^3."""

__version__ = "0.1.0"
