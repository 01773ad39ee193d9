"""Prototype-based multimodal self-supervised learning for synchronized
PPG + accelerometer time series."""

__version__ = "0.1.0"
