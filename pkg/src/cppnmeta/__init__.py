"""Evolving periodic metamaterial unit cells encoded by CPPN genomes."""

__version__ = "0.1.0"
