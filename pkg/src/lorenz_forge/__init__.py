"""Discrete Lorenz attractors born from non-simple heteroclinic cycles."""

__version__ = "0.1.0"
