"""Measurement toolkit for RPKI route origin validation adoption."""
__version__ = "0.1.0"
