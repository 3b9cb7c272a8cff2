"""Graded microstructure topology optimization for low-Reynolds fluid flow."""

__version__ = "0.1.0"
