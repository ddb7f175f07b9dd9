"""Exact symbolic verifier for metrics with holonomy inside split G2."""

__version__ = "0.1.0"
