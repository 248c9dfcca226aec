"""Tsirelson-Vershik cascade sampler with H1 blackness statistics."""

__version__ = "0.1.0"
