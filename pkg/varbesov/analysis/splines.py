# varbesov/analysis/splines.py
"""Dyadic tensor-product B-splines, quasi-interpolants and the spline coefficient norm.

N^l_{k,m}(x) = prod_i N^l(2^k x_i - m_i), where N^l is the cardinal B-spline
of degree l on [0, l + 1] with integer knots.

The quasi-interpolant Q_k reads f only on the knot interval
[m + j0, m + j0 + 1] 2^-k of each spline (j0 = (l + 1) // 2). Its weights
are the minimum-norm solution of the biorthogonality system against the
l + 1 splines alive on that interval, sampled at the grid points. Q_k is
therefore exact on every spline of level k, polynomials of coordinate
degree <= l included, as far as the data of the box allow.
"""

import functools
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal, sparse
from scipy.interpolate import BSpline
from scipy.special import comb

from ..core.error_handling import GridError, ResolutionError, WeightError
from ..core.grid import (
    DyadicCube,
    GridFunction,
    cube_index_range,
    local_lp_norm,
    lp_norm_of_array,
)
from ..core.models import NormValue, RatioSummary
from ..utils import parallel_map
from .weights import WeightSequence, weight_coefficients

logger = logging.getLogger(__name__)

RESOLUTION_MARGIN = 3


@functools.lru_cache(maxsize=None)
def _cardinal(l: int) -> BSpline:
    if l < 0:
        raise GridError(f"spline degree must be >= 0, got {l}")
    return BSpline.basis_element(np.arange(l + 2, dtype=float), extrapolate=False)


def cardinal_bspline(l: int, u: np.ndarray) -> np.ndarray:
    """N^l(u), zero outside [0, l + 1)."""
    u = np.asarray(u, dtype=float)
    return np.nan_to_num(_cardinal(l)(u), nan=0.0)


def bspline_eval(l: int, k: int, m: Sequence[int], x: Sequence[float]) -> np.ndarray:
    """N^l_{k,m}(x); ``x`` is one point or an array whose last axis has len(m) entries."""
    m = np.atleast_1d(np.asarray(m, dtype=int))
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != m.shape:
        raise GridError(f"point of shape {x.shape} does not match index {tuple(m)}")
    values = cardinal_bspline(l, x * 2.0 ** k - m)
    out = np.prod(values, axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class SplineLayer:
    """S(x) = sum_m beta_{k,m} N^l_{k,m}(x) with coefficients on a box of indices.

    ``coeffs[i]`` belongs to the index m = offset + i.
    """

    k: int
    l: int
    offset: Tuple[int, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != len(self.offset):
            raise GridError(
                f"coefficients have {coeffs.ndim} axes, offset has {len(self.offset)}"
            )
        if self.k < 0 or self.l < 0:
            raise GridError(f"invalid spline level/degree k={self.k}, l={self.l}")
        object.__setattr__(self, "offset", tuple(int(o) for o in self.offset))
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def zeros(cls, k: int, l: int, dim: int) -> "SplineLayer":
        return cls(k, l, (0,) * dim, np.zeros((1,) * dim))

    @property
    def dim(self) -> int:
        return len(self.offset)

    @property
    def upper(self) -> Tuple[int, ...]:
        """One past the largest index on each axis."""
        return tuple(o + s for o, s in zip(self.offset, self.coeffs.shape))

    def scaled(self, factor: float) -> "SplineLayer":
        return SplineLayer(self.k, self.l, self.offset, self.coeffs * factor)

    def padded(self, lower: Sequence[int], upper: Sequence[int]) -> np.ndarray:
        """Coefficients on the index box [lower, upper), zero where undefined."""
        out = np.zeros([hi - lo for lo, hi in zip(lower, upper)])
        src, dst = [], []
        for lo, hi, o, size in zip(lower, upper, self.offset, self.coeffs.shape):
            a, b = max(lo, o), min(hi, o + size)
            if b <= a:
                return out
            src.append(slice(a - o, b - o))
            dst.append(slice(a - lo, b - lo))
        out[tuple(dst)] = self.coeffs[tuple(src)]
        return out

    def coefficient(self, m: Sequence[int]) -> float:
        idx = tuple(int(v) - o for v, o in zip(m, self.offset))
        if any(i < 0 or i >= s for i, s in zip(idx, self.coeffs.shape)):
            return 0.0
        return float(self.coeffs[idx])

    def evaluate(self, grid: GridFunction) -> GridFunction:
        """S sampled on the grid of ``grid``."""
        if grid.dim != self.dim:
            raise GridError(f"{self.dim}-dimensional spline on a {grid.dim}-dimensional grid")
        out = self.coeffs
        for axis, (o, size) in enumerate(zip(self.offset, self.coeffs.shape)):
            matrix = _design_matrix(grid.axis_points(), self.k, self.l, o, size)
            out = _apply_axis(matrix, out, axis)
        return grid.with_values(out)

    def entries(self) -> List[Tuple[Tuple[int, ...], float]]:
        nonzero = np.argwhere(self.coeffs != 0)
        return [
            (tuple(int(i) + o for i, o in zip(idx, self.offset)), float(self.coeffs[tuple(idx)]))
            for idx in nonzero
        ]

    def to_json(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "l": self.l,
            "dim": self.dim,
            "entries": [[list(m), beta] for m, beta in self.entries()],
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "SplineLayer":
        k, l, dim = int(data["k"]), int(data["l"]), int(data["dim"])
        entries = data.get("entries", [])
        if not entries:
            return cls.zeros(k, l, dim)
        index = np.array([m for m, _ in entries], dtype=int).reshape(len(entries), dim)
        lower = index.min(axis=0)
        coeffs = np.zeros(index.max(axis=0) - lower + 1)
        for row, (_, beta) in zip(index, entries):
            coeffs[tuple(row - lower)] = float(beta)
        return cls(k, l, tuple(int(v) for v in lower), coeffs)


def _design_matrix(points: np.ndarray, k: int, l: int, offset: int,
                   size: int) -> sparse.csr_matrix:
    """Sparse matrix B[i, j] = N^l(2^k x_i - offset - j), at most l + 1 entries per row."""
    u = points * 2.0 ** k
    base = np.floor(u).astype(int)
    rows, cols, vals = [], [], []
    for d in range(l + 1):
        m = base - d
        col = m - offset
        keep = (col >= 0) & (col < size)
        rows.append(np.nonzero(keep)[0])
        cols.append(col[keep])
        vals.append(cardinal_bspline(l, u[keep] - m[keep]))
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(points.size, size),
    ).tocsr()


def _apply_axis(matrix, values: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(values, axis, 0)
    out = matrix @ moved.reshape(moved.shape[0], -1)
    out = np.asarray(out).reshape((matrix.shape[0],) + moved.shape[1:])
    return np.moveaxis(out, 0, axis)


def _refinement_mask(l: int) -> np.ndarray:
    return np.array([comb(l + 1, i, exact=True) for i in range(l + 2)], dtype=float) / 2.0 ** l


def refine_layer(layer: SplineLayer) -> SplineLayer:
    """The same spline written in the level k + 1 basis.

    N^l(u) = 2^-l sum_i C(l + 1, i) N^l(2u - i), applied on every axis.
    """
    up = np.zeros([2 * s - 1 for s in layer.coeffs.shape])
    up[tuple(slice(None, None, 2) for _ in range(layer.dim))] = layer.coeffs
    mask = _refinement_mask(layer.l)
    kernel = functools.reduce(np.multiply.outer, [mask] * layer.dim)
    fine = signal.convolve(up, kernel, mode="full")
    return SplineLayer(layer.k + 1, layer.l, tuple(2 * o for o in layer.offset), fine)


def subtract_layers(a: SplineLayer, b: SplineLayer) -> SplineLayer:
    if (a.k, a.l, a.dim) != (b.k, b.l, b.dim):
        raise GridError(f"cannot subtract level {b.k} degree {b.l} from level {a.k} degree {a.l}")
    lower = tuple(min(x, y) for x, y in zip(a.offset, b.offset))
    upper = tuple(max(x, y) for x, y in zip(a.upper, b.upper))
    return SplineLayer(a.k, a.l, lower, a.padded(lower, upper) - b.padded(lower, upper))


# quasi-interpolation


def _check_quasi_resolution(f: GridFunction, k: int, l: int) -> int:
    if k < 0:
        raise GridError(f"spline level must be >= 0, got {k}")
    if f.level < k + RESOLUTION_MARGIN:
        raise ResolutionError(
            f"grid level J={f.level} too coarse for spline level {k}; "
            f"need J >= k + {RESOLUTION_MARGIN}"
        )
    scaled = f.box_radius * 2.0 ** k
    if abs(scaled - round(scaled)) > 1e-9:
        raise GridError(f"box radius {f.box_radius} is not a multiple of 2^-{k}")
    samples = 2 ** (f.level - k)
    if samples < l + 1:
        raise ResolutionError(f"{samples} samples per knot interval cannot resolve degree {l}")
    return samples


@functools.lru_cache(maxsize=None)
def dual_weights(l: int, samples: int) -> np.ndarray:
    """Weights w_p with sum_p w_p N^l(u_p - d) = [d == 0] for the splines alive on [j0, j0 + 1].

    u_p are the midpoints of ``samples`` equal cells of the knot interval.
    """
    j0 = (l + 1) // 2
    u = j0 + (np.arange(samples) + 0.5) / samples
    shifts = np.arange(j0 - l, j0 + 1)
    system = np.stack([cardinal_bspline(l, u - d) for d in shifts])
    target = (shifts == 0).astype(float)
    weights, *_ = np.linalg.lstsq(system, target, rcond=None)
    weights.setflags(write=False)
    return weights


def quasi_interpolant(f: GridFunction, k: int, l: int) -> SplineLayer:
    """Q_k f as a level-k spline layer; coefficients come from one knot interval each."""
    samples = _check_quasi_resolution(f, k, l)
    weights = dual_weights(l, samples)
    intervals = f.cells // samples
    out = f.values
    for axis in range(f.dim):
        moved = np.moveaxis(out, axis, -1)
        blocks = moved.reshape(moved.shape[:-1] + (intervals, samples))
        out = np.moveaxis(blocks @ weights, -1, axis)
    j0 = (l + 1) // 2
    first = -int(round(f.box_radius * 2 ** k)) - j0
    return SplineLayer(k, l, (first,) * f.dim, out)


@dataclass(frozen=True)
class SplineDecomposition:
    """Layers v_0 = Q_0 f and v_k = Q_k f - Q_{k-1} f, written in the level-k basis."""

    layers: Tuple[SplineLayer, ...]
    residual_norm: float
    grid: GridFunction

    @property
    def K(self) -> int:
        return len(self.layers) - 1

    def scaled(self, factor: float) -> "SplineDecomposition":
        return SplineDecomposition(
            tuple(layer.scaled(factor) for layer in self.layers),
            abs(factor) * self.residual_norm,
            self.grid,
        )


def _interior(f: GridFunction, margin: float) -> Tuple[slice, ...]:
    cells = min(int(math.ceil(margin / f.spacing)), f.cells // 2)
    return tuple(slice(cells, f.cells - cells) for _ in range(f.dim))


def spline_decompose(f: GridFunction, l: int, K: int, r: float) -> SplineDecomposition:
    if K < 0:
        raise GridError(f"level cap must be >= 0, got {K}")
    approximations = parallel_map(lambda k: quasi_interpolant(f, k, l), range(K + 1))
    layers = [approximations[0]]
    for coarse, fine in zip(approximations, approximations[1:]):
        layers.append(subtract_layers(fine, refine_layer(coarse)))
    top = approximations[-1].evaluate(f)
    interior = _interior(f, (l + 1) * 2.0 ** (-K))
    residual = lp_norm_of_array((f.values - top.values)[interior], r, f.cell_volume)
    logger.debug("spline decomposition l=%d K=%d: residual %.3e", l, K, residual)
    return SplineDecomposition(tuple(layers), residual, f.with_values(np.zeros(f.shape)))


def synthesize(dec: SplineDecomposition) -> GridFunction:
    """sum_k v_k on the grid of the decomposed function."""
    total = np.zeros(dec.grid.shape)
    for layer in dec.layers:
        total += layer.evaluate(dec.grid).values
    return dec.grid.with_values(total)


def coeff_norm(dec: SplineDecomposition, t: WeightSequence, p: float, q: float) -> NormValue:
    """(sum_k (sum_m t_{k,m}^p |beta_{k,m}|^p)^{q/p})^{1/q} for this decomposition.

    Spline indices past the box take the weight coefficient of the nearest cube.
    """
    if dec.K > t.K:
        raise WeightError(f"weight sequence has {t.K + 1} levels, decomposition has {dec.K + 1}")
    terms = []
    for layer in dec.layers:
        coeffs = weight_coefficients(t, layer.k)
        cubes = cube_index_range(t.grid, layer.k)
        index = [
            np.clip(o + np.arange(size) - cubes[0], 0, cubes.size - 1)
            for o, size in zip(layer.offset, layer.coeffs.shape)
        ]
        weighted = coeffs[np.ix_(*index)] * np.abs(layer.coeffs)
        terms.append(lp_norm_of_array(weighted, p, 1.0))
    return NormValue.from_terms(terms, q)


# local coefficient / norm equivalence


def _inverse(r: float) -> float:
    return 0.0 if math.isinf(r) else 1.0 / r


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return math.nan if num == 0 else math.inf
    return num / den


@dataclass(frozen=True)
class LocalEquivalence:
    """The three sides of C1 ||S|L_r1(Q)|| <= (sum |beta|^r1 2^-kn)^{1/r1} <= C2 (...)||S|L_r2(C3 Q)||."""

    lhs: float
    middle: float
    rhs: float

    @property
    def lower_constant(self) -> float:
        return _ratio(self.middle, self.lhs)

    @property
    def upper_constant(self) -> float:
        return _ratio(self.middle, self.rhs)

    def check(self, c1: Optional[float] = None,
              c2: Optional[float] = None) -> Tuple[bool, bool]:
        """(lower_ok, upper_ok); without constants, finiteness of the fitted ones."""
        if self.lhs == self.middle == self.rhs == 0:
            return True, True
        lower, upper = self.lower_constant, self.upper_constant
        lower_ok = math.isfinite(lower) if c1 is None else c1 * self.lhs <= self.middle * (1 + 1e-12)
        upper_ok = math.isfinite(upper) if c2 is None else self.middle <= c2 * self.rhs * (1 + 1e-12)
        return lower_ok, upper_ok


def spread_factor(l: int) -> int:
    """C3: the concentric cube C3 Q contains the supports of all splines alive on Q."""
    return 2 * l + 1


def verify_local_equivalence(layer: SplineLayer, r1: float, r2: float, cube: DyadicCube,
                grid: GridFunction) -> LocalEquivalence:
    """Evaluate the local coefficient / norm equivalence for S on one cube of its level."""
    if cube.k != layer.k or cube.dim != layer.dim:
        raise GridError(f"cube of rank {cube.k} for a level-{layer.k} spline")
    values = layer.evaluate(grid)
    n, k = layer.dim, layer.k
    lhs = local_lp_norm(values, r1, cube)
    lower = tuple(m - layer.l for m in cube.m)
    upper = tuple(m + 1 for m in cube.m)
    middle = lp_norm_of_array(layer.padded(lower, upper), r1, 2.0 ** (-k * n))
    rhs = 2.0 ** (k * n * (_inverse(r2) - _inverse(r1))) * local_lp_norm(
        values, r2, cube, spread_factor(layer.l)
    )
    return LocalEquivalence(lhs, middle, rhs)


def fit_local_equivalence(k: int, l: int, r1: float, r2: float, trials: int = 64, seed: int = 0,
             dim: int = 1, level: Optional[int] = None) -> Tuple[float, float]:
    """Fitted (C1, C2) over random coefficient vectors around the cube Q_{k,0}."""
    level = k + 5 if level is None else level
    radius = float(math.ceil((2 * l + 2) * 2.0 ** (-k)))
    grid = GridFunction.zeros(dim, radius, level)
    cube = DyadicCube(k, (0,) * dim)
    rng = np.random.default_rng(seed)
    shape = (3 * l + 2,) * dim
    offset = (-2 * l - 1,) * dim
    lower, upper = [], []
    for _ in range(trials):
        layer = SplineLayer(k, l, offset, rng.standard_normal(shape))
        report = verify_local_equivalence(layer, r1, r2, cube, grid)
        lower.append((report.middle, report.lhs))
        upper.append((report.middle, report.rhs))
    c1 = RatioSummary.from_pairs(lower).low
    c2 = RatioSummary.from_pairs(upper).high
    logger.debug("local equivalence k=%d l=%d r1=%g r2=%g: C1=%.4g C2=%.4g", k, l, r1, r2, c1, c2)
    return c1, c2
