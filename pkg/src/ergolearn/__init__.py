"""Bayesian prediction of stationary processes and its ergodic components."""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
