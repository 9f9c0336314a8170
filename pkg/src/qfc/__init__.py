"""Numerical laboratory for measurement interventions on a free massless scalar field."""

__version__ = "0.1.0"
