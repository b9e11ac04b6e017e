"""Hybrid graph sparsification for mechanistic neural ODEs."""

__version__ = "0.1.0"
