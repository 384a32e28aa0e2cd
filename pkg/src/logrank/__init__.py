"""Rank, discrepancy and deterministic protocols for sign matrices."""

__version__ = "0.1.0"
