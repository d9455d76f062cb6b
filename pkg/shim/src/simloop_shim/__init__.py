"""Candidate-controller runtime for the simloop wire protocol."""

from .shim import main, serve

__all__ = ["main", "serve"]
__version__ = "0.1.0"
