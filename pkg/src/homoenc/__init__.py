"""Episodic variational training objectives on tractable 1D model families."""

__version__ = "0.1.0"
