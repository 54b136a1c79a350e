"""Evolving recurrent-network controllers in a triple T-maze."""

__version__ = "0.1.0"
