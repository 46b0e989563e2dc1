"""Spatio-temporal wind speed forecasting with graph attention and frequency-enhanced blocks."""

__version__ = "0.1.0"
