"""Adaptive noise cancellation toolkit for dual-microphone audio."""

__version__ = "0.1.0"
