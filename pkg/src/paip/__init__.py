"""Perception-action loop agents with exact and variational inference."""

__version__ = "0.1.0"
