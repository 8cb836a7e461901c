# varbesov/analysis/fourier.py
"""Fourier-side quasi-norm with a dyadic partition of unity Psi_j.

The box is read as a torus; layer j is the inverse FFT of Psi_j times the
transform of f, with Psi_j(xi) = psi0(2^-j |xi|) - psi0(2^{1-j} |xi|).
"""

import logging
import math

import numpy as np
from scipy import fft

from ..core.error_handling import ResolutionError
from ..core.grid import GridFunction
from ..core.models import NormValue
from .weights import WeightSequence, weighted_lp_terms

logger = logging.getLogger(__name__)


def _smooth_zero(x: np.ndarray) -> np.ndarray:
    out = np.zeros(np.shape(x))
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def psi0(radius: np.ndarray) -> np.ndarray:
    """Smooth radial step: 1 on [0, 1], 0 on [2, inf)."""
    radius = np.asarray(radius, dtype=float)
    up = _smooth_zero(2.0 - radius)
    down = _smooth_zero(radius - 1.0)
    return up / (up + down)


def psi_level(radius: np.ndarray, j: int) -> np.ndarray:
    if j == 0:
        return psi0(radius)
    return psi0(radius * 2.0 ** (-j)) - psi0(radius * 2.0 ** (1 - j))


def frequency_radius(f: GridFunction) -> np.ndarray:
    """|xi| on the FFT lattice of f (angular frequencies)."""
    axis = 2.0 * math.pi * fft.fftfreq(f.cells, d=f.spacing)
    grids = np.meshgrid(*([axis] * f.dim), indexing="ij", sparse=True)
    return np.sqrt(sum(g ** 2 for g in grids))


def fourier_layers(f: GridFunction, K: int) -> list:
    nyquist = math.pi * 2.0 ** f.level
    if 2.0 ** (K - 1) >= nyquist:
        raise ResolutionError(
            f"level {K} annulus starts at |xi| = {2.0 ** (K - 1):g}, beyond the Nyquist "
            f"frequency {nyquist:g}"
        )
    spectrum = fft.fftn(f.values)
    radius = frequency_radius(f)
    return [np.real(fft.ifftn(psi_level(radius, j) * spectrum)) for j in range(K + 1)]


def fourier_lp_norm(f: GridFunction, s_weights: WeightSequence, p: float, q: float,
                    K: int) -> NormValue:
    """(sum_{j<=K} ||s_j F^-1(Psi_j F f) | L_p||^q)^{1/q} on the periodic box."""
    layers = fourier_layers(f, K)
    terms = weighted_lp_terms(s_weights, layers, p)
    logger.debug("fourier norm terms: %s", terms)
    return NormValue.from_terms(terms, q)
