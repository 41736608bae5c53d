"""Quantization by projection onto cells, active-set coding and codelength statistics."""

__version__ = "0.1.0"
