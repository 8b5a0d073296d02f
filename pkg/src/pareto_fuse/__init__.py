"""Desk-scale laboratory for neural multi-objective ensemble sorting with an
iterative Pareto weight-search loop."""

__version__ = "0.1.0"
