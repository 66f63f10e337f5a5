"""Interpretable poverty mapping from open geospatial features."""

__version__ = "0.1.0"
