"""Corpora, hypothesis checks and the experiment harness."""
