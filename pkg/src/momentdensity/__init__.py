"""Detect whether a moment sequence can come from a measure with a density."""

__version__ = "0.1.0"
