"""Emergent recruitment of articulators under black-box policy search."""

__version__ = "0.1.0"
