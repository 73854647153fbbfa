"""Recover a medium's phase constant from Hong-Ou-Mandel visibility traces."""

__version__ = "0.1.0"
