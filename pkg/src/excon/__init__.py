"""Extreme-instance contrastive representation learning for imbalanced time series."""

__version__ = "0.1.0"
