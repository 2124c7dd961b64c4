"""Correlation-aware divide-and-conquer classification of packet payloads."""
__version__ = "0.1.0"
