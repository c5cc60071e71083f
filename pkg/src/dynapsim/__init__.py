"""Simulator, compiler and memory optimizer for a tag-routed multi-core
neuromorphic fabric."""

__version__ = "0.1.0"
