"""Skeleton-based temporal action segmentation with text-derived relational graphs."""

__version__ = "0.1.0"
