"""Landmark-conditioned face re-synthesis for anonymization."""

__version__ = "0.1.0"
