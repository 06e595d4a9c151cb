"""Closed-curve object tracking for rotoscoping."""

__version__ = "0.1.0"
