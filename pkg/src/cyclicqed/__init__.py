"""Driven-dissipative cavity QED with cyclic three-level ensembles."""

__version__ = "0.1.0"
