"""Structural complexity and geometric similarity metrics for CAD models."""

__version__ = "0.1.0"
