"""Argument state-change video event extraction on synthetic grid-feature clips."""
__version__ = "0.1.0"
