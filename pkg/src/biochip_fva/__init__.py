"""Fluid volume assignment for flow-based microfluidic biochips."""

__version__ = "0.1.0"
