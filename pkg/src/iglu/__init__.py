"""IGLU activation family: gates, kernels, oracles and experiments."""

__version__ = "0.1.0"
