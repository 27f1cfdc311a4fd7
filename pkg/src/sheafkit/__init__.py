"""Sheaves on finite posets as a modelling language for coupled systems."""

__version__ = "0.1.0"
