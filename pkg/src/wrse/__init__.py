"""Weighted Resolution Survival Ensemble and weighted survival metrics."""

__version__ = "0.1.0"
