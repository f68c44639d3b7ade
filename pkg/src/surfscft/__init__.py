"""Adaptive high-order surface finite elements for block-copolymer SCFT."""

__version__ = "0.1.0"
