# varbesov/core/grid.py
"""Uniform dyadic grids, dyadic cubes, midpoint quadrature and discrete convolution.

A :class:`GridFunction` samples a function on the cell midpoints of a uniform
grid of spacing ``h = 2**-J`` over the box ``[-R, R]**n``; each sample stands
for its cell, so integrals are midpoint sums and are exactly additive over
dyadic cubes aligned with the grid. Outside the box the function is zero.

Kernels use the same type with a box radius of ``(M + 1/2) h``: their
samples then sit on integer multiples of ``h`` and include the origin, which
keeps convolution output on the midpoints of the function's grid.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import signal

from .error_handling import GridError, ResolutionError

logger = logging.getLogger(__name__)

MAX_DIM = 3
_EDGE_EPS = 1e-9


class QuadratureRule(Enum):
    MIDPOINT = "midpoint"


@dataclass(frozen=True)
class Quadrature:
    """Midpoint rule on a grid of level J."""

    level: int
    rule: QuadratureRule = QuadratureRule.MIDPOINT

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.level)

    def cell_volume(self, dim: int) -> float:
        return self.spacing ** dim

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.cell_volume(values.ndim))


@dataclass(frozen=True)
class Box:
    """Axis-parallel box given by its lower and upper corners."""

    lower: Tuple[float, ...]
    upper: Tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise GridError("box corners differ in dimension")
        if any(lo >= hi for lo, hi in zip(self.lower, self.upper)):
            raise GridError(f"empty box {self.lower} .. {self.upper}")

    @classmethod
    def cube(cls, radius: float, dim: int) -> "Box":
        return cls(tuple([-radius] * dim), tuple([radius] * dim))

    @property
    def dim(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class DyadicCube:
    """The cube prod_i [m_i 2^-k, (m_i + 1) 2^-k) of rank k."""

    k: int
    m: Tuple[int, ...]

    def __post_init__(self):
        if self.k < 0:
            raise GridError(f"cube rank must be >= 0, got {self.k}")
        object.__setattr__(self, "m", tuple(int(v) for v in self.m))

    @property
    def dim(self) -> int:
        return len(self.m)

    @property
    def side(self) -> float:
        return 2.0 ** (-self.k)

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.m, dtype=float) + 0.5) * self.side

    def scaled_bounds(self, c: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
        """Corners of the concentric cube cQ of side c 2^-k."""
        half = 0.5 * c * self.side
        return self.center - half, self.center + half


def cubes_in_box(k: int, box: Box) -> List[DyadicCube]:
    """Rank-k dyadic cubes meeting the box in a set of positive measure.

    Returned in lexicographic order of m.
    """
    if k < 0:
        raise GridError(f"cube rank must be >= 0, got {k}")
    scale = 2.0 ** k
    ranges = [
        range(math.floor(lo * scale), math.ceil(hi * scale))
        for lo, hi in zip(box.lower, box.upper)
    ]
    return [DyadicCube(k, m) for m in itertools.product(*ranges)]


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples of a real function on the midpoint grid of [-R, R]^n at level J."""

    dim: int
    box_radius: float
    level: int
    values: np.ndarray

    def __post_init__(self):
        if not 1 <= self.dim <= MAX_DIM:
            raise GridError(f"dimension must be in 1..{MAX_DIM}, got {self.dim}")
        if self.box_radius <= 0:
            raise GridError(f"box radius must be positive, got {self.box_radius}")
        cells = 2.0 * self.box_radius * 2.0 ** self.level
        if abs(cells - round(cells)) > 1e-9:
            raise GridError(
                f"box radius {self.box_radius} is not a multiple of half the spacing "
                f"2^-{self.level}"
            )
        values = np.array(self.values, dtype=float)
        expected = (int(round(cells)),) * self.dim
        if values.shape != expected:
            raise GridError(f"values have shape {values.shape}, expected {expected}")
        if not np.all(np.isfinite(values)):
            raise GridError("grid values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    # construction

    @classmethod
    def from_function(
        cls,
        fn: Callable[..., np.ndarray],
        dim: int,
        box_radius: float,
        level: int,
    ) -> "GridFunction":
        """Sample ``fn(x_1, ..., x_n)`` on the midpoint grid (broadcast coordinates)."""
        template = cls.zeros(dim, box_radius, level)
        coords = template.coordinates()
        values = np.broadcast_to(np.asarray(fn(*coords), dtype=float), template.shape)
        return cls(dim, box_radius, level, values)

    @classmethod
    def zeros(cls, dim: int, box_radius: float, level: int) -> "GridFunction":
        cells = int(round(2.0 * box_radius * 2.0 ** level))
        return cls(dim, box_radius, level, np.zeros((cells,) * dim))

    @classmethod
    def kernel_from_function(
        cls,
        fn: Callable[..., np.ndarray],
        dim: int,
        radius: float,
        level: int,
    ) -> "GridFunction":
        """Sample a compactly supported kernel on the nodes z = i h, |i| <= ceil(radius/h)."""
        h = 2.0 ** (-level)
        half = int(math.ceil(radius / h - _EDGE_EPS))
        return cls.from_function(fn, dim, (half + 0.5) * h, level)

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.dim, self.box_radius, self.level, values)

    # geometry

    @property
    def spacing(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def cells(self) -> int:
        return self.values.shape[0]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.values.shape

    @property
    def box(self) -> Box:
        return Box.cube(self.box_radius, self.dim)

    @property
    def quadrature(self) -> Quadrature:
        return Quadrature(self.level)

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @property
    def node_centered(self) -> bool:
        """True when the samples lie on integer multiples of h (origin included)."""
        offset = (0.5 - self.box_radius / self.spacing) % 1.0
        return min(offset, 1.0 - offset) < 1e-9

    def axis_points(self) -> np.ndarray:
        return -self.box_radius + (np.arange(self.cells) + 0.5) * self.spacing

    def coordinates(self) -> List[np.ndarray]:
        axis = self.axis_points()
        return np.meshgrid(*([axis] * self.dim), indexing="ij", sparse=True)

    def same_grid(self, other: "GridFunction") -> bool:
        return (
            self.dim == other.dim
            and self.level == other.level
            and abs(self.box_radius - other.box_radius) < 1e-12
        )

    def nearest_index(self, x: Sequence[float]) -> Tuple[int, ...]:
        point = np.atleast_1d(np.asarray(x, dtype=float))
        if point.shape != (self.dim,):
            raise GridError(f"point {x} does not have dimension {self.dim}")
        idx = np.floor((point + self.box_radius) / self.spacing).astype(int)
        if np.any(idx < 0) or np.any(idx >= self.cells):
            raise GridError(f"point {x} lies outside the box")
        return tuple(int(i) for i in idx)

    # integrals

    def integral(self) -> float:
        return self.quadrature.integrate(self.values)

    def lp_norm(self, p: float) -> float:
        return lp_norm_of_array(self.values, p, self.cell_volume)

    # I/O

    def to_csv(self, path: Union[str, Path]) -> None:
        lines = ["dim,J,R", f"{self.dim},{self.level},{self.box_radius!r}"]
        lines.extend(repr(float(v)) for v in self.values.ravel(order="C"))
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "GridFunction":
        rows = Path(path).read_text().split()
        if not rows or rows[0] != "dim,J,R":
            raise GridError(f"{path}: missing 'dim,J,R' header")
        try:
            dim_s, level_s, radius_s = rows[1].split(",")
            dim, level, radius = int(dim_s), int(level_s), float(radius_s)
            data = np.array([float(v) for v in rows[2:]])
        except (IndexError, ValueError) as exc:
            raise GridError(f"{path}: malformed grid function file ({exc})") from exc
        cells = int(round(2.0 * radius * 2.0 ** level))
        if data.size != cells ** dim:
            raise GridError(f"{path}: expected {cells ** dim} values, found {data.size}")
        return cls(dim, radius, level, data.reshape((cells,) * dim))


def lp_norm_of_array(values: np.ndarray, p: float, cell_volume: float) -> float:
    """Midpoint-rule L_p (quasi-)norm; p = inf is the grid maximum."""
    if values.size == 0:
        return 0.0
    a = np.abs(values)
    if math.isinf(p):
        return float(a.max())
    return float((np.sum(a ** p) * cell_volume) ** (1.0 / p))


def interval_indices(
    f: GridFunction, lower: np.ndarray, upper: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Index ranges [start, stop) of the midpoints lying in [lower, upper) on one axis."""
    scaled_lo = (np.asarray(lower, dtype=float) + f.box_radius) / f.spacing - 0.5
    scaled_hi = (np.asarray(upper, dtype=float) + f.box_radius) / f.spacing - 0.5
    start = np.clip(np.ceil(scaled_lo - _EDGE_EPS), 0, f.cells).astype(int)
    stop = np.clip(np.ceil(scaled_hi - _EDGE_EPS), 0, f.cells).astype(int)
    return start, np.maximum(stop, start)


def cube_slices(f: GridFunction, cube: DyadicCube, c: float = 1.0) -> Tuple[slice, ...]:
    lower, upper = cube.scaled_bounds(c)
    start, stop = interval_indices(f, lower, upper)
    return tuple(slice(int(a), int(b)) for a, b in zip(start, stop))


def cube_index_range(f: GridFunction, k: int) -> np.ndarray:
    """Per-axis cube indices m of the rank-k cubes meeting the box of f."""
    scale = 2.0 ** k
    return np.arange(
        math.floor(-f.box_radius * scale), math.ceil(f.box_radius * scale)
    )


def cube_windows(f: GridFunction, k: int, c: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Per-axis [start, stop) index windows of the cubes cQ_{k,m}, m in cube_index_range."""
    m = cube_index_range(f, k)
    side = 2.0 ** (-k)
    center = (m + 0.5) * side
    return interval_indices(f, center - 0.5 * c * side, center + 0.5 * c * side)


_FILL = {"max": -np.inf, "min": np.inf}


def _reduce_axis(
    values: np.ndarray, starts: np.ndarray, stops: np.ndarray, axis: int, how: str
) -> np.ndarray:
    if how == "sum":
        pad = [(0, 0)] * values.ndim
        pad[axis] = (1, 0)
        cs = np.pad(np.cumsum(values, axis=axis), pad)
        return np.take(cs, stops, axis=axis) - np.take(cs, starts, axis=axis)
    ufunc = np.maximum if how == "max" else np.minimum
    nonempty = stops > starts
    if np.all(nonempty) and np.all(stops[:-1] == starts[1:]):
        block = np.take(values, np.arange(starts[0], stops[-1]), axis=axis)
        return ufunc.reduceat(block, starts - starts[0], axis=axis)
    parts = []
    for a, b in zip(starts, stops):
        if b > a:
            parts.append(ufunc.reduce(np.take(values, np.arange(a, b), axis=axis), axis=axis))
        else:
            shape = list(values.shape)
            del shape[axis]
            parts.append(np.full(shape, _FILL[how]))
    return np.stack(parts, axis=axis)


def window_reduce(
    values: np.ndarray, starts: np.ndarray, stops: np.ndarray, how: str = "sum"
) -> np.ndarray:
    """Reduce a grid array over the tensor windows prod_i [starts, stops) on every axis.

    ``how`` is one of ``sum``, ``max`` or ``min``. Empty windows give 0, -inf, +inf.
    """
    if how not in ("sum", "max", "min"):
        raise ValueError(f"unknown reduction {how!r}")
    out = values
    for axis in range(values.ndim):
        out = _reduce_axis(out, starts, stops, axis, how)
    return out


def cube_reduce(f: GridFunction, k: int, c: float = 1.0, how: str = "sum",
                values: Optional[np.ndarray] = None) -> np.ndarray:
    """Array over cube_index_range**n of a reduction of ``values`` (default f.values) on cQ_{k,m}."""
    starts, stops = cube_windows(f, k, c)
    return window_reduce(f.values if values is None else values, starts, stops, how)


def expand_cube_values(f: GridFunction, k: int, cube_values: np.ndarray) -> np.ndarray:
    """Piecewise-constant grid array taking cube_values[m] on the grid points of Q_{k,m}."""
    starts, stops = cube_windows(f, k)
    owner = np.empty(f.cells, dtype=int)
    for i, (a, b) in enumerate(zip(starts, stops)):
        owner[a:b] = i
    return cube_values[np.ix_(*([owner] * f.dim))]


def local_lp_norm(f: GridFunction, p: float, cube: DyadicCube, scale: float = 1.0) -> float:
    """(int_{cQ} |f|^p)^{1/p} by the midpoint rule; p = inf gives the max over cQ."""
    if scale < 1.0:
        raise GridError(f"cube scale must be >= 1, got {scale}")
    if cube.dim != f.dim:
        raise GridError(f"cube of dimension {cube.dim} on a {f.dim}-dimensional grid")
    slices = cube_slices(f, cube, scale)
    if any(s.stop <= s.start for s in slices):
        raise GridError(f"cube outside domain: k={cube.k}, m={cube.m}")
    return lp_norm_of_array(f.values[slices], p, f.cell_volume)


def convolve(f: GridFunction, g: GridFunction, method: str = "auto") -> GridFunction:
    """Riemann-sum convolution h^n sum_y g(x - y) f(y).

    At least one argument must be sampled on a node lattice containing the
    origin (a kernel). The result lives on the grid of the other argument,
    or of the larger one when both are kernels, so ``convolve(f, g)`` and
    ``convolve(g, f)`` agree. ``method`` is passed to
    :func:`scipy.signal.convolve` (``auto``, ``fft`` or ``direct``).
    """
    if f.dim != g.dim or f.level != g.level:
        raise GridError(
            f"mismatched grids: dim {f.dim}/{g.dim}, level {f.level}/{g.level}"
        )
    if not (f.node_centered or g.node_centered):
        raise GridError("mismatched grids: one argument must be sampled on nodes i*h")
    if f.node_centered and (not g.node_centered or g.cells > f.cells):
        f, g = g, f
    out = signal.convolve(f.values, g.values, mode="same", method=method)
    return f.with_values(out * f.cell_volume)


def rescale_kernel(g: GridFunction, j: int) -> GridFunction:
    """g_j = 2^{jn} g(2^j .) on the same spacing; j = 0 returns g."""
    if j < 0:
        raise GridError(f"rescale level must be >= 0, got {j}")
    if j == 0:
        return g
    if not g.node_centered:
        raise GridError("kernels must be sampled on nodes i*h to be rescaled")
    stride = 2 ** j
    half = (g.cells - 1) // 2
    new_half = half // stride
    if new_half < 2:
        raise ResolutionError(f"resolution insufficient for level {j}")
    idx = half + stride * np.arange(-new_half, new_half + 1)
    values = g.values[np.ix_(*([idx] * g.dim))] * 2.0 ** (j * g.dim)
    logger.debug("rescaled kernel to level %d: %d nodes per axis", j, idx.size)
    return GridFunction(g.dim, (new_half + 0.5) * g.spacing, g.level, values)
