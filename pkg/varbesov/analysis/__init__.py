"""Weights, sequences and the quasi-norms built on them."""
