"""Bit-accurate TCD-MAC models and a cycle-level TCD-NPE simulator."""

__version__ = "0.1.0"
