"""Partial-secrecy metrics for MRC wiretap links over MFTR fading."""

__version__ = "0.1.0"
