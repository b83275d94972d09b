"""Secure ISAC transmit design: beamforming, robust variants and symbol-level precoding."""

__version__ = "0.1.0"
