"""Learned selection of concise, task-conditioned state descriptions."""

__version__ = "0.1.0"
