"""Exact set-structured empirical risk minimizers and rate experiments."""

__version__ = "0.1.0"
