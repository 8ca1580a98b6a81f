"""Crater-rim particle-filter localization for rovers driving in darkness."""

__version__ = "0.1.0"
