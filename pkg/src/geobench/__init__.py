"""Benchmarking suite for spatiotemporal (moving-object) data stores."""

__version__ = "0.1.0"
