# src/mitfas/__init__.py
"""Mutual-information temporal feature alignment and frame sampling."""

__version__ = "0.1.0"
