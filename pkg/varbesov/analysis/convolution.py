# varbesov/analysis/convolution.py
"""Mollifiers with vanishing moments and the dyadic convolution quasi-norm.

A mollifier is a tensor product of a symmetric 1D profile

    phi0_1d(x) = sum_i c_i b(x / lambda_i) / lambda_i,   b(x) = exp(-1 / (1 - x^2)),

whose coefficients solve the even-moment system on the kernel nodes, so the
discrete moments vanish to solver precision. The difference kernel
phi = phi0 - 2^-n phi0(./2) is evaluated from the same profile.
"""

import functools
import itertools
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import NormParams
from ..core.error_handling import ExponentError, GridError, HypothesisError, MollifierError
from ..core.grid import GridFunction, convolve, cube_reduce, rescale_kernel
from ..core.models import NormValue, RatioSummary
from ..utils import ensure_directory, parallel_map
from .weights import WeightSequence, bar_transform, weight_coefficients, weighted_lp_terms

logger = logging.getLogger(__name__)

MOMENT_TOL = 1e-8
MAX_CONDITION = 1e12
MIN_SCALE_CELLS = 4


def _bump(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape)
    inside = np.abs(x) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@dataclass(frozen=True)
class _Profile:
    scales: Tuple[float, ...]
    coefficients: Tuple[float, ...]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        total = np.zeros(np.shape(x))
        for c, lam in zip(self.coefficients, self.scales):
            total = total + c * _bump(np.asarray(x) / lam) / lam
        return total

    def tensor(self, *coords: np.ndarray) -> np.ndarray:
        return functools.reduce(np.multiply, [self(x) for x in coords])


@dataclass(frozen=True, eq=False)
class Mollifier:
    phi0: GridFunction
    phi: GridFunction
    support_radius: float
    L_phi: int
    M_requested: int
    scales: Tuple[float, ...]
    coefficients: Tuple[float, ...]
    condition_number: float

    @property
    def dim(self) -> int:
        return self.phi0.dim

    @property
    def level(self) -> int:
        return self.phi0.level

    @property
    def max_level(self) -> int:
        """Largest k for which phi_k is still resolved on the grid."""
        half = (self.phi.cells - 1) // 2
        return max(0, int(math.floor(math.log2(half / 2.0))))

    def kernel(self, k: int) -> GridFunction:
        """phi_0 for k = 0, else phi_k = 2^{kn} phi(2^k .)."""
        return self.phi0 if k == 0 else rescale_kernel(self.phi, k)


def _node_axis(radius: float, level: int) -> np.ndarray:
    h = 2.0 ** (-level)
    half = int(math.ceil(radius / h - 1e-9))
    return h * np.arange(-half, half + 1)


def _solve_profile(M: int, support_radius: float, level: int) -> Tuple[_Profile, float]:
    h = 2.0 ** (-level)
    m = M // 2
    scales = support_radius * (1.0 - np.arange(m + 1) / (m + 1.0))
    if scales.min() < MIN_SCALE_CELLS * h:
        raise MollifierError(
            f"support {support_radius} too small for M={M} at level {level}: "
            f"smallest bump scale {scales.min():.3g} is below {MIN_SCALE_CELLS} cells"
        )
    z = _node_axis(support_radius, level)
    system = np.array([
        [np.sum(z ** (2 * q) * _bump(z / lam) / lam) * h for lam in scales]
        for q in range(m + 1)
    ])
    condition = float(np.linalg.cond(system))
    if not condition <= MAX_CONDITION:
        raise MollifierError(
            f"moment system ill-conditioned for M={M} (condition number {condition:.3g})",
            condition_number=condition,
        )
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    coefficients = np.linalg.solve(system, rhs)
    return _Profile(tuple(float(s) for s in scales), tuple(float(c) for c in coefficients)), condition


def _vanishing_order(profile: _Profile, dim: int, support_radius: float, level: int,
                     max_order: int) -> int:
    """Largest L with every discrete moment of phi of order <= L below MOMENT_TOL."""
    h = 2.0 ** (-level)
    z = _node_axis(2.0 * support_radius, level)
    own = profile(z)
    half = profile(z / 2.0)
    mu = [float(np.sum(z ** j * own) * h) for j in range(max_order + 1)]
    nu = [float(np.sum(z ** j * half) * h) for j in range(max_order + 1)]
    order = -1
    for total in range(max_order + 1):
        for beta in itertools.product(range(total + 1), repeat=dim):
            if sum(beta) != total:
                continue
            moment = math.prod(mu[b] for b in beta) - 2.0 ** (-dim) * math.prod(nu[b] for b in beta)
            if abs(moment) > MOMENT_TOL:
                return order
        order = total
    return order


def _assemble(profile: _Profile, dim: int, M: int, support_radius: float, level: int,
              condition: float) -> Mollifier:
    phi0 = GridFunction.kernel_from_function(profile.tensor, dim, support_radius, level)
    scale = 2.0 ** (-dim)

    def difference(*coords):
        return profile.tensor(*coords) - scale * profile.tensor(*[x / 2.0 for x in coords])

    phi = GridFunction.kernel_from_function(difference, dim, 2.0 * support_radius, level)
    L_phi = _vanishing_order(profile, dim, support_radius, level, M + 6)
    return Mollifier(phi0, phi, support_radius, L_phi, M, profile.scales,
                     profile.coefficients, condition)


def build_mollifier(dim: int, M: int = 2, support_radius: float = 0.5,
                    level: int = 10) -> Mollifier:
    """phi0 with unit mass and vanishing moments of orders 1..M, sampled at grid level ``level``."""
    if M < 0:
        raise MollifierError(f"moment order must be >= 0, got {M}")
    profile, condition = _solve_profile(M, support_radius, level)
    mol = _assemble(profile, dim, M, support_radius, level, condition)
    logger.debug("mollifier dim=%d M=%d rho=%s J=%d: L_phi=%d cond=%.3g", dim, M,
                 support_radius, level, mol.L_phi, condition)
    return mol


def save_mollifier(mol: Mollifier, path: Union[str, Path]) -> Path:
    """Write phi0 as grid CSV plus a JSON sidecar with its metadata."""
    path = Path(path)
    ensure_directory(path.parent)
    mol.phi0.to_csv(path)
    meta = {
        "support_radius": mol.support_radius,
        "L_phi": mol.L_phi,
        "M_requested": mol.M_requested,
        "scales": list(mol.scales),
        "coefficients": list(mol.coefficients),
        "condition_number": mol.condition_number,
    }
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(meta, indent=2) + "\n")
    return sidecar


def load_mollifier(path: Union[str, Path]) -> Mollifier:
    """Rebuild a mollifier from a CSV written by :func:`save_mollifier`."""
    path = Path(path)
    grid = GridFunction.from_csv(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    profile = _Profile(tuple(meta["scales"]), tuple(meta["coefficients"]))
    return _assemble(profile, grid.dim, int(meta["M_requested"]), float(meta["support_radius"]),
                     grid.level, float(meta["condition_number"]))


@dataclass(frozen=True, eq=False)
class ConvField:
    """Layers phi_k * f for k = 0..K."""

    layers: Tuple[GridFunction, ...]
    mollifier: Mollifier

    @property
    def K(self) -> int:
        return len(self.layers) - 1


def conv_field(f: GridFunction, mol: Mollifier, K: int) -> ConvField:
    if mol.level != f.level or mol.dim != f.dim:
        raise GridError(
            f"mismatched grids: mollifier at dim {mol.dim} level {mol.level}, "
            f"function at dim {f.dim} level {f.level}"
        )

    def layer(k: int) -> GridFunction:
        start = time.perf_counter()
        out = convolve(f, mol.kernel(k))
        logger.debug("layer %d: %.3fs", k, time.perf_counter() - start)
        return out

    return ConvField(tuple(parallel_map(layer, range(K + 1))), mol)


def conv_norm_from_field(cf: ConvField, t: WeightSequence, params: NormParams) -> NormValue:
    terms = weighted_lp_terms(t, [layer.values for layer in cf.layers], params.p)
    return NormValue.from_terms(terms, params.q)


def conv_norm(f: GridFunction, t: WeightSequence, mol: Mollifier,
              params: NormParams) -> NormValue:
    """(sum_{k<=K} ||t_k (phi_k * f) | L_p||^q)^{1/q}."""
    return conv_norm_from_field(conv_field(f, mol, params.K), t, params)


@dataclass(frozen=True)
class MaximalField:
    """M_A(m, j, c) per level j, over the rank-j cubes of the box.

    ``argmax_k`` records the level k attaining each supremum.
    """

    values: Tuple[np.ndarray, ...]
    argmax_k: Tuple[np.ndarray, ...]
    A: float
    c: float
    K: int

    def at_cap(self) -> int:
        """Number of entries (j < K) whose sup is attained at the truncation level K."""
        return int(sum(np.count_nonzero(a == self.K) for j, a in enumerate(self.argmax_k)
                       if j < self.K))


def maximal_field(cf: ConvField, A: float, c: float = 1.0,
                  j_max: Optional[int] = None) -> MaximalField:
    """sup_{j<=k<=K} 2^{A(j-k)} sup_{y in cQ_{j,m}} |phi_k * f(y)|."""
    if not A > 0:
        raise ExponentError(f"A must be positive, got {A}")
    if c < 1:
        raise ExponentError(f"cube scale must be >= 1, got {c}")
    K = cf.K
    j_max = K if j_max is None else min(j_max, K)
    magnitudes = [np.abs(layer.values) for layer in cf.layers]

    def level(j: int):
        best, arg = None, None
        for k in range(j, K + 1):
            cand = 2.0 ** (A * (j - k)) * cube_reduce(cf.layers[k], j, c, how="max",
                                                       values=magnitudes[k])
            if best is None:
                best, arg = cand, np.full(cand.shape, k)
            else:
                arg = np.where(cand > best, k, arg)
                best = np.maximum(best, cand)
        return best, arg

    results = parallel_map(level, range(j_max + 1))
    field = MaximalField(tuple(r[0] for r in results), tuple(r[1] for r in results), A, c, K)
    if field.at_cap():
        logger.debug("maximal field: %d entries attained at the level cap K=%d",
                     field.at_cap(), K)
    return field


def verify_maximal_bound(f: GridFunction, mol: Mollifier, r: float, c1: float = 1.0,
                   A: float = 3.0, K: Optional[int] = None,
                   j_max: Optional[int] = None) -> float:
    """Smallest C with M_A(m, j, c1) <= C (sum_k 2^{(j-k)Ar} 2^{kn} int_{c2Q} |phi_k*f|^r)^{1/r}.

    c2 = c1 + 4 * support_radius covers the support of every phi_k * psi_j.
    Returns 0 when both sides vanish everywhere.
    """
    if not 0 < r < math.inf:
        raise ExponentError(f"r must lie in (0, inf), got {r}")
    K = mol.max_level if K is None else K
    cf = conv_field(f, mol, K)
    mf = maximal_field(cf, A, c1, j_max)
    c2 = c1 + 4.0 * mol.support_radius
    n = f.dim
    powered = [np.abs(layer.values) ** r for layer in cf.layers]
    worst = 0.0
    for j, lhs in enumerate(mf.values):
        rhs = np.zeros(lhs.shape)
        for k in range(j, K + 1):
            local = cube_reduce(cf.layers[k], j, c2, values=powered[k]) * f.cell_volume
            rhs = rhs + 2.0 ** ((j - k) * A * r + k * n) * local
        rhs = rhs ** (1.0 / r)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
        worst = max(worst, float(ratio.max()))
    return worst


def verify_weighted_maximal(f: GridFunction, t: WeightSequence, mol: Mollifier, A: float,
                   c: float, mu: float, params: NormParams, check_hypotheses: bool = True) -> float:
    """Ratio of the weighted maximal-function sum to conv_norm.

    LHS = (sum_j (sum_m t_{j,m}^p M_A(m, j, c)^p)^{q/p})^{1/q}. Returns 0 for f = 0.
    """
    if check_hypotheses:
        from ..experiments.hypotheses import conv_violations

        violations = conv_violations(t, params, A, mu)
        if violations:
            raise HypothesisError(violations, component="convolution")
    cf = conv_field(f, mol, params.K)
    mf = maximal_field(cf, A, c)
    terms = []
    for j, values in enumerate(mf.values):
        weighted = weight_coefficients(t, j) * values
        if math.isinf(params.p):
            terms.append(float(weighted.max()))
        else:
            terms.append(float(np.sum(weighted ** params.p) ** (1.0 / params.p)))
    lhs = NormValue.from_terms(terms, params.q).value
    rhs = conv_norm_from_field(cf, t, params).value
    if rhs == 0:
        return 0.0 if lhs == 0 else math.inf
    return lhs / rhs


def verify_mollifier_independence(corpus: Sequence[GridFunction], mol_a: Mollifier, mol_b: Mollifier,
                     t: WeightSequence, params: NormParams) -> Tuple[RatioSummary, RatioSummary]:
    """Ratios conv_norm_b / conv_norm_a and their inverses over a corpus."""

    def pair(f: GridFunction) -> Tuple[float, float]:
        return conv_norm(f, t, mol_a, params).value, conv_norm(f, t, mol_b, params).value

    values = parallel_map(pair, corpus)
    forward = RatioSummary.from_pairs((b, a) for a, b in values)
    backward = RatioSummary.from_pairs((a, b) for a, b in values)
    return forward, backward


def verify_bar_invariance(corpus: Sequence[GridFunction], mol: Mollifier, t: WeightSequence,
                          params: NormParams) -> RatioSummary:
    """Ratios conv_norm(f, t) / conv_norm(f, t-bar) over a corpus."""
    barred = bar_transform(t)
    values = parallel_map(
        lambda f: (conv_norm(f, t, mol, params).value, conv_norm(f, barred, mol, params).value),
        corpus,
    )
    return RatioSummary.from_pairs(values)


def reconstruction_error(f: GridFunction, cf: ConvField, r: float) -> float:
    """||f - sum_{k<=K} phi_k * f | L_r|| (phi_0 + sum phi_k telescopes to phi0_K)."""
    partial = np.sum([layer.values for layer in cf.layers], axis=0)
    return f.with_values(f.values - partial).lp_norm(r)


def _unit_cube_lr(grid: GridFunction, values: np.ndarray, r: float) -> np.ndarray:
    magnitude = np.abs(values)
    if math.isinf(r):
        return cube_reduce(grid, 0, how="max", values=magnitude)
    sums = cube_reduce(grid, 0, values=magnitude ** r) * grid.cell_volume
    return sums ** (1.0 / r)


def block_increments(cf: ConvField, r: float, start: int = 1,
                     stop: Optional[int] = None) -> List[np.ndarray]:
    """||sum_{j=J1}^{J2} phi_j * f | L_r(Q_{0,m})|| per unit cube m, for J1 = start..J2.

    J2 is ``stop`` (default K), so entry i is the tail block starting at level start + i.
    """
    stop = cf.K if stop is None else min(stop, cf.K)
    if start > stop:
        return []
    tail = np.zeros(cf.layers[0].shape)
    out = []
    for layer in reversed(cf.layers[start:stop + 1]):
        tail = tail + layer.values
        out.append(_unit_cube_lr(layer, tail, r))
    return out[::-1]


def geometric_rate(values: Sequence[float]) -> float:
    """Least-squares ratio of a geometrically decaying positive sequence (nan if < 2 points)."""
    logs = [math.log2(v) for v in values if v > 0]
    if len(logs) < 2:
        return math.nan
    slope = np.polyfit(np.arange(len(logs)), logs, 1)[0]
    return float(2.0 ** slope)

