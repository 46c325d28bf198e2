"""Two- vs three-dose optimization under a fixed total sample size."""

__version__ = "0.1.0"
