"""Noise-free observable recovery by hypersurface fits over varied noise rates."""

__version__ = "0.1.0"
