"""Synthetic tabular data generation and evaluation for student-performance data."""

__version__ = "0.1.0"
