"""varbesov - Besov quasi-norms of variable smoothness on dyadic grids."""

__version__ = "0.3.0"
