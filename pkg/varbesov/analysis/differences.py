# varbesov/analysis/differences.py
"""Finite differences and the difference-based quasi-norms.

Steps h are grid-aligned: an integer number of cells per axis. Stencils that
leave the box read zeros, unless the function is flagged as compactly
supported inside the box (``NormParams.compact_support``); then those points
are left out of the quadrature. The h- and y-integrals of the averaged
modulus use the trapezoid rule on the grid nodes of the window (half weight
at the edge), which is exact for the piecewise-linear cases the tests rely on.
"""

import itertools
import logging
import math
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage
from scipy.special import comb

from ..config import NormParams
from ..core.error_handling import GridError, ResolutionError
from ..core.grid import GridFunction
from ..core.models import NormValue
from ..utils import parallel_map
from .weights import WeightSequence, weighted_lp_terms

logger = logging.getLogger(__name__)

RESOLUTION_MARGIN = 3


def _shifted(values: np.ndarray, offset: Sequence[int]) -> np.ndarray:
    """out[x] = values[x + offset], zero where x + offset leaves the array."""
    out = np.zeros_like(values)
    src, dst = [], []
    for o, size in zip(offset, values.shape):
        if abs(o) >= size:
            return out
        if o >= 0:
            src.append(slice(o, size))
            dst.append(slice(0, size - o))
        else:
            src.append(slice(0, size + o))
            dst.append(slice(-o, size))
    out[tuple(dst)] = values[tuple(src)]
    return out


def _difference(values: np.ndarray, step: Sequence[int], l: int,
                compact: bool = False) -> np.ndarray:
    out = np.zeros_like(values)
    for i in range(l + 1):
        coeff = (-1) ** (l + i) * comb(l, i, exact=True)
        out += coeff * _shifted(values, [i * s for s in step])
    if compact:
        out[~stencil_inside(values.shape, step, l)] = 0.0
    return out


def _grid_step(f: GridFunction, h: Sequence[float]) -> Tuple[int, ...]:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != (f.dim,):
        raise GridError(f"step {tuple(h)} does not have dimension {f.dim}")
    cells = h / f.spacing
    rounded = np.round(cells)
    if np.any(np.abs(cells - rounded) > 1e-9):
        raise GridError(f"step {tuple(h)} is not a multiple of the spacing 2^-{f.level}")
    return tuple(int(c) for c in rounded)


def stencil_inside(shape: Sequence[int], step: Sequence[int], l: int) -> np.ndarray:
    """True where every stencil point x + i h, 0 <= i <= l, lies on the grid."""
    mask = np.ones(tuple(shape), dtype=bool)
    for axis, (s, size) in enumerate(zip(step, shape)):
        end = np.arange(size) + l * s
        view = [1] * len(shape)
        view[axis] = size
        mask &= ((end >= 0) & (end < size)).reshape(view)
    return mask


def check_compact_support(f: GridFunction) -> None:
    """Raise unless f vanishes on the outermost layer of grid points."""
    for axis in range(f.dim):
        faces = np.take(f.values, [0, f.cells - 1], axis=axis)
        if np.any(faces != 0):
            raise GridError(
                "function flagged as compactly supported inside the box does not vanish "
                f"on the boundary layer (axis {axis}, max |f| = {np.abs(faces).max():.3g})"
            )


def finite_difference(f: GridFunction, h: Sequence[float], l: int,
                      compact: bool = False) -> GridFunction:
    """Delta^l(h) f(x) = sum_{i=0}^{l} (-1)^{l+i} C(l, i) f(x + i h).

    Stencils leaving the box read zeros. With ``compact`` the function must
    vanish on the boundary layer, and points whose stencil leaves the box
    are excluded (set to 0).
    """
    if l < 1:
        raise GridError(f"difference order must be >= 1, got {l}")
    step = _grid_step(f, h)
    if any(l * abs(s) >= f.cells for s in step):
        raise GridError(f"difference stencil l*h = {l}*{tuple(h)} exceeds the box")
    if compact:
        check_compact_support(f)
    out = _difference(f.values, step, l, compact)
    return f.with_values(out)


def _stride(half_width: int, h_nodes: Optional[int]) -> int:
    if h_nodes is None or half_width <= h_nodes:
        return 1
    return 2 ** int(math.floor(math.log2(half_width / h_nodes)))


def _trapezoid_box(values: np.ndarray, half_width: int) -> np.ndarray:
    """sum over |y_i - x_i| <= half_width with half weight on the window faces."""
    out = values
    for axis in range(values.ndim):
        size = 2 * half_width + 1
        window = ndimage.uniform_filter1d(out, size, axis=axis, mode="constant") * size
        offset = [0] * values.ndim
        offset[axis] = half_width
        low = _shifted(out, [-o for o in offset])
        high = _shifted(out, offset)
        out = window - 0.5 * (low + high)
    return out


def _max_box(values: np.ndarray, half_width: int) -> np.ndarray:
    return ndimage.maximum_filter(values, size=2 * half_width + 1, mode="constant", cval=0.0)


def _difference_sum(f: GridFunction, k: int, l: int, r: float,
                    h_nodes: Optional[int], compact: bool = False) -> np.ndarray:
    """int_{2^-k I^n} |Delta^l(h) f|^r dh at every grid point (max over h for r = inf)."""
    if not 0 <= k <= f.level:
        raise ResolutionError(f"resolution insufficient for level {k}")
    half = 2 ** (f.level - k)
    stride = _stride(half, h_nodes)
    offsets = np.arange(-half, half + 1, stride)
    weights = np.full(offsets.size, float(stride))
    weights[0] = weights[-1] = 0.5 * stride
    acc = np.zeros(f.shape)
    for combo in itertools.product(range(offsets.size), repeat=f.dim):
        step = [int(offsets[i]) for i in combo]
        if all(s == 0 for s in step):
            continue
        diff = np.abs(_difference(f.values, step, l, compact))
        if math.isinf(r):
            np.maximum(acc, diff, out=acc)
        else:
            acc += math.prod(weights[i] for i in combo) * diff ** r
    if math.isinf(r):
        return acc
    return acc * f.cell_volume


def delta_lr_field(f: GridFunction, k: int, l: int, r: float,
                   h_nodes: Optional[int] = None, compact: bool = False) -> GridFunction:
    """delta^l_r(x + 2^-k I^n) f at every grid point x.

    (2^{2kn} int_{x + 2^-k I^n} int_{2^-k I^n} |Delta^l(h) f(y)|^r dh dy)^{1/r}
    """
    half = 2 ** (f.level - k) if k <= f.level else 0
    inner = _difference_sum(f, k, l, r, h_nodes, compact)
    if math.isinf(r):
        return f.with_values(_max_box(inner, half))
    outer = _trapezoid_box(inner, half) * f.cell_volume
    outer = np.maximum(outer, 0.0) * 2.0 ** (2 * k * f.dim)
    return f.with_values(outer ** (1.0 / r))


def delta_lr(f: GridFunction, x: Sequence[float], k: int, l: int, r: float,
             h_nodes: Optional[int] = None, compact: bool = False) -> float:
    """delta^l_r at the grid point nearest to x."""
    index = f.nearest_index(x)
    return float(delta_lr_field(f, k, l, r, h_nodes, compact).values[index])


def averaged_diff(f: GridFunction, k: int, l: int, r: float,
                  h_nodes: Optional[int] = None, compact: bool = False) -> GridFunction:
    """(2^{kn} int_{2^-k I^n} |Delta^l(h) f(x)|^r dh)^{1/r}, no average over x."""
    inner = _difference_sum(f, k, l, r, h_nodes, compact)
    if math.isinf(r):
        return f.with_values(inner)
    return f.with_values((inner * 2.0 ** (k * f.dim)) ** (1.0 / r))


def sliding_lr_field(f: GridFunction, r: float) -> GridFunction:
    """||f | L_r(x + I^n)|| at every grid point x."""
    half = 2 ** f.level
    magnitude = np.abs(f.values)
    if math.isinf(r):
        return f.with_values(_max_box(magnitude, half))
    sums = np.maximum(_trapezoid_box(magnitude ** r, half), 0.0) * f.cell_volume
    return f.with_values(sums ** (1.0 / r))


def sliding_lr(f: GridFunction, x: Sequence[float], r: float) -> float:
    return float(sliding_lr_field(f, r).values[f.nearest_index(x)])


def _reciprocal(r: float) -> float:
    return 0.0 if math.isinf(r) else 1.0 / r


def jensen_constant(dim: int, r1: float, r2: float) -> float:
    """c with delta_{r1} <= c delta_{r2} for r1 <= r2 (the double window has mass 4^n)."""
    return 4.0 ** (dim * (_reciprocal(r1) - _reciprocal(r2)))


def _check_input(f: GridFunction, params: NormParams) -> None:
    if f.level < params.K + RESOLUTION_MARGIN:
        raise ResolutionError(
            f"grid level J={f.level} too coarse for K={params.K}; "
            f"need J >= K + {RESOLUTION_MARGIN}"
        )
    if params.compact_support:
        check_compact_support(f)


def diff_norm(f: GridFunction, t: WeightSequence, params: NormParams) -> NormValue:
    """(sum_{k<=K} ||t_k delta^l_r f | L_p||^q)^{1/q} + ||t_0 ||f|L_r(. + I^n)|| | L_p||."""
    _check_input(f, params)
    fields = parallel_map(
        lambda k: delta_lr_field(f, k, params.l, params.r, params.h_nodes,
                                 params.compact_support).values,
        range(params.K + 1),
    )
    terms = weighted_lp_terms(t, fields, params.p)
    zero_order = weighted_lp_terms(t, [sliding_lr_field(f, params.r).values], params.p)[0]
    logger.debug("diff norm: terms %s, zero-order %.6g", terms, zero_order)
    return NormValue.from_terms(terms, params.q, zero_order)


def averaged_diff_norm(f: GridFunction, t: WeightSequence, params: NormParams) -> NormValue:
    """(sum_{1<=k<=K} ||t_k avg-Delta^l_1(2^-k) f | L_p||^q)^{1/q} + ||t_0 ||f|L_1(. + I^n)|| | L_p||."""
    _check_input(f, params)
    fields = parallel_map(
        lambda k: averaged_diff(f, k, params.l, 1.0, params.h_nodes,
                                params.compact_support).values,
        range(1, params.K + 1),
    )
    terms = weighted_lp_terms(t, fields, params.p, first_level=1)
    zero_order = weighted_lp_terms(t, [sliding_lr_field(f, 1.0).values], params.p)[0]
    return NormValue.from_terms(terms, params.q, zero_order)
