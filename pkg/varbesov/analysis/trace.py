# varbesov/analysis/trace.py
"""Weighted Sobolev norms and the trace weights on the plane x'' = 0.

The ambient grid has ``trace_dim`` tangential axes first and ``codim``
normal axes last. The trace of a smooth function is its restriction; on a
midpoint grid the plane falls between two sample layers, so the trace is
their mean.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Tuple

import numpy as np

from ..config import NormParams
from ..core.error_handling import GridError, HypothesisError, ResolutionError, WeightError
from ..core.grid import GridFunction, cube_reduce, expand_cube_values, lp_norm_of_array
from ..experiments.hypotheses import trace_violations
from .differences import diff_norm
from .weights import WeightSequence

logger = logging.getLogger(__name__)

TRACE_MARGIN = 3


@dataclass(frozen=True)
class SobolevParams:
    l: int
    p: float
    gamma: GridFunction

    def __post_init__(self):
        if self.l < 1:
            raise WeightError(f"Sobolev order must be >= 1, got {self.l}")
        if not 1 < self.p < math.inf:
            raise WeightError(f"Sobolev exponent must lie in (1, inf), got {self.p}")
        if np.any(self.gamma.values <= 0):
            raise WeightError("Sobolev weight must be positive")


def multi_indices(dim: int, order: int) -> Iterator[Tuple[int, ...]]:
    """All alpha in N_0^dim with |alpha| <= order, in lexicographic order."""
    for alpha in itertools.product(range(order + 1), repeat=dim):
        if sum(alpha) <= order:
            yield alpha


def derivative(f: GridFunction, alpha: Tuple[int, ...]) -> np.ndarray:
    """D^alpha f by repeated second-order centred differences."""
    out = f.values
    for axis, times in enumerate(alpha):
        for _ in range(times):
            out = np.gradient(out, f.spacing, axis=axis, edge_order=2)
    return out


def sobolev_norm(f: GridFunction, params: SobolevParams) -> float:
    """sum_{|alpha| <= l} ||gamma D^alpha f | L_p||."""
    if not f.same_grid(params.gamma):
        raise GridError("function and Sobolev weight live on different grids")
    total = 0.0
    for alpha in multi_indices(f.dim, params.l):
        weighted = params.gamma.values * derivative(f, alpha)
        total += lp_norm_of_array(weighted, params.p, f.cell_volume)
    return total


def _split(gamma: GridFunction, trace_dim: int, codim: int) -> None:
    if trace_dim < 1 or codim < 1:
        raise GridError(f"trace and normal dimensions must be >= 1, got {trace_dim}, {codim}")
    if trace_dim + codim != gamma.dim:
        raise GridError(
            f"trace dimension {trace_dim} + codimension {codim} != ambient dimension {gamma.dim}"
        )


def _trace_grid(ambient: GridFunction, trace_dim: int) -> GridFunction:
    return GridFunction.zeros(trace_dim, ambient.box_radius, ambient.level)


def normal_radius(ambient: GridFunction, trace_dim: int) -> np.ndarray:
    """|x''| on the normal axes, broadcast against the ambient grid."""
    coords = ambient.coordinates()[trace_dim:]
    return np.sqrt(sum(c ** 2 for c in coords))


def trace_weights(gamma: GridFunction, p: float, K: int, trace_dim: int = 1,
                  codim: int = 1) -> WeightSequence:
    """gamma_k on the trace plane, constant on rank-k cubes.

    gamma_k^p on Q_{k,m} is the integral of gamma over Q_{k,m} times the
    shell 2^{-k-1} <= |x''| < 2^{-k} in the normal variables.
    """
    _split(gamma, trace_dim, codim)
    if K > gamma.level - TRACE_MARGIN:
        raise ResolutionError(
            f"trace level K={K} needs grid level J >= K + {TRACE_MARGIN}, got J={gamma.level}"
        )
    if np.any(gamma.values <= 0):
        raise WeightError("trace weight gamma must be positive")
    plane = _trace_grid(gamma, trace_dim)
    radius = np.broadcast_to(normal_radius(gamma, trace_dim), gamma.shape)
    normal_axes = tuple(range(trace_dim, gamma.dim))
    normal_volume = gamma.spacing ** codim
    levels = []
    for k in range(K + 1):
        shell = (radius >= 2.0 ** (-k - 1)) & (radius < 2.0 ** (-k))
        profile = np.sum(np.where(shell, gamma.values, 0.0), axis=normal_axes) * normal_volume
        integrals = cube_reduce(plane, k, values=profile) * plane.cell_volume
        levels.append(plane.with_values(expand_cube_values(plane, k, integrals ** (1.0 / p))))
    ratios = [lv.values / levels[0].values for lv in levels]
    alpha1 = tuple(float(r.min()) for r in ratios)
    alpha2 = tuple(float(r.max()) for r in ratios)
    logger.debug("trace weights K=%d: level minima %s", K, [float(lv.values.min()) for lv in levels])
    return WeightSequence(tuple(levels), p, p, p, alpha1, alpha2, 0.0)


def restrict(f: GridFunction, trace_dim: int) -> GridFunction:
    """Mean of the sample layers adjacent to x'' = 0 on every normal axis."""
    codim = f.dim - trace_dim
    middle = f.cells // 2
    values = f.values
    for _ in range(codim):
        values = 0.5 * (values[..., middle - 1] + values[..., middle])
    return _trace_grid(f, trace_dim).with_values(values)


@dataclass(frozen=True)
class TraceResult:
    trace_norm: float
    sobolev_norm: float
    K: int
    level: int

    @property
    def ratio(self) -> float:
        if self.sobolev_norm == 0:
            return 0.0 if self.trace_norm == 0 else math.inf
        return self.trace_norm / self.sobolev_norm


def trace_experiment(f: GridFunction, gamma: GridFunction, p: float, l: int, K: int,
                     trace_dim: int = 1, r: float = 1.0,
                     check_hypotheses: bool = True) -> TraceResult:
    """||trace f | B^{gamma_k}_{p,p}|| against ||f | W^l_p(gamma)||."""
    _split(gamma, trace_dim, f.dim - trace_dim)
    codim = f.dim - trace_dim
    if check_hypotheses:
        violations = trace_violations(gamma, p, r, l, codim)
        if violations:
            raise HypothesisError(violations, component="trace")
    weights = trace_weights(gamma, p, K, trace_dim, codim)
    params = NormParams(p=p, q=p, r=1.0, l=l, K=K)
    lhs = diff_norm(restrict(f, trace_dim), weights, params).value
    rhs = sobolev_norm(f, SobolevParams(l, p, gamma))
    logger.debug("trace experiment J=%d K=%d: %.6g / %.6g", f.level, K, lhs, rhs)
    return TraceResult(lhs, rhs, K, f.level)
