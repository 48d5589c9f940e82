"""Seedable agent-based bushfire evacuation simulator."""

__version__ = "0.1.0"
