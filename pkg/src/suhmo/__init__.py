"""Unconditional generation of pairs of head-motion landmark sequences."""

__version__ = "0.1.0"
