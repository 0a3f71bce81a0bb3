"""Explain time-series clusterings through classifiers trained on the cluster labels."""

__version__ = "0.1.0"
