"""Terminology extraction and hypernym detection for technical corpora."""

__version__ = "0.1.0"
