"""Synchronization certificates for first-order Kuramoto / lossless power networks."""

__version__ = "0.1.0"
