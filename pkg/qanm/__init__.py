"""Quantized Nesterov distributed optimization over directed graphs."""

__version__ = "0.1.0"
