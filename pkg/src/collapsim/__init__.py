"""Electron double-slit simulator with phonon-triggered collapse."""

__version__ = "0.1.0"
