"""Grids, shared records and the exception hierarchy."""
