"""Exact geometry and numerical continuity paths for toric Sasaki cones."""

__version__ = "0.1.0"
