# tests/conftest.py
"""Shared fixtures: small dyadic grids, smooth test functions and unit weights."""

import numpy as np
import pytest

from varbesov.analysis.weights import make_weights
from varbesov.core.grid import GridFunction


def smooth_bump(center: float = 0.1, radius: float = 0.5, amplitude: float = 1.0):
    """C-infinity bump supported in |x - center| < radius (first coordinate)."""

    def fn(*coords):
        dist = sum((c - (center if i == 0 else 0.0)) ** 2 for i, c in enumerate(coords))
        dist = np.broadcast_to(dist / radius ** 2, np.broadcast(*coords).shape)
        out = np.zeros(dist.shape)
        inside = dist < 1.0
        out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - dist[inside]))
        return out

    return fn


@pytest.fixture
def grid_1d():
    return GridFunction.zeros(1, 2.0, 8)


@pytest.fixture
def bump_1d():
    return GridFunction.from_function(smooth_bump(), 1, 2.0, 8)


@pytest.fixture
def bump_factory():
    def build(dim: int = 1, level: int = 8, center: float = 0.1, radius: float = 0.5,
              amplitude: float = 1.0, box_radius: float = 2.0) -> GridFunction:
        return GridFunction.from_function(smooth_bump(center, radius, amplitude), dim,
                                          box_radius, level)

    return build


@pytest.fixture
def unit_weights():
    """t_k = 1 on the 1D grid of level 8, K = 3."""
    return make_weights("two_ks", s=0.0, level=8, K=3)


@pytest.fixture
def smooth_weights():
    """t_k = 2^{k/2} on the 1D grid of level 8, K = 3."""
    return make_weights("two_ks", s=0.5, level=8, K=3)
