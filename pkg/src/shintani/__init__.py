"""Theta lifts of modular eigensymbols and square-root p-adic L-functions."""

__version__ = "0.1.0"
