"""Discrete-event simulator of a two-sided ride-pooling market."""

__version__ = "0.1.0"
