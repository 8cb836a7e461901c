# varbesov/analysis/weights.py
"""Weight sequences {t_k}, their local L_p coefficients and the class checks.

Every class check is empirical: constants are fitted over the levels
``k <= j <= k_max`` and the dyadic cubes of the box. A sequence built from a
generator is re-checked one grid level finer, and a check only reports
membership when its constants survive that refinement.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from ..config import WeightGenerator, WeightManifest
from ..core.error_handling import GridError, ResolutionError, WeightError
from ..core.grid import (
    DyadicCube,
    GridFunction,
    cube_index_range,
    cube_reduce,
    expand_cube_values,
    local_lp_norm,
    lp_norm_of_array,
)
from ..core.models import ClassReport
from ..utils import ensure_directory, parallel_map
from .sequences import conjugate_exponent

logger = logging.getLogger(__name__)

STABILITY_TOL = 0.01
Y_PAIR_SAMPLES = 2048
_PAIR_CHUNK = 256


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Levels t_0 .. t_K on one grid plus the class metadata (p, sigma, alpha)."""

    levels: Tuple[GridFunction, ...]
    p: float
    sigma1: float
    sigma2: float
    alpha1: Tuple[float, ...]
    alpha2: Tuple[float, ...]
    alpha3: float
    provenance: Optional[WeightGenerator] = None

    def __post_init__(self):
        levels = tuple(self.levels)
        if not levels:
            raise WeightError("a weight sequence needs at least one level")
        first = levels[0]
        for k, t_k in enumerate(levels):
            if not t_k.same_grid(first):
                raise WeightError(f"level {k} lives on a different grid")
            if np.any(t_k.values <= 0):
                raise WeightError(f"weight level {k} is not positive on every grid point")
        for name in ("p", "sigma1", "sigma2"):
            if not getattr(self, name) > 0:
                raise WeightError(f"{name} must be positive")
        if self.alpha3 < 0:
            raise WeightError("alpha3 must be >= 0")
        for name in ("alpha1", "alpha2"):
            seq = tuple(float(a) for a in getattr(self, name))
            if len(seq) != len(levels) or any(not a > 0 for a in seq):
                raise WeightError(f"{name} needs {len(levels)} positive entries")
            object.__setattr__(self, name, seq)
        object.__setattr__(self, "levels", levels)

    @property
    def K(self) -> int:
        return len(self.levels) - 1

    @property
    def grid(self) -> GridFunction:
        return self.levels[0]

    def replace_levels(self, levels: Sequence[GridFunction],
                       provenance: Optional[WeightGenerator] = None) -> "WeightSequence":
        return WeightSequence(tuple(levels), self.p, self.sigma1, self.sigma2,
                              self.alpha1, self.alpha2, self.alpha3, provenance)

    def refined(self) -> Optional["WeightSequence"]:
        """The same generator sampled one grid level finer, if it is known."""
        if self.provenance is None:
            return None
        return weights_from_generator(
            self.provenance.model_copy(update={"level": self.provenance.level + 1})
        )


# coefficients


def _check_level(t: WeightSequence, k: int) -> GridFunction:
    if not 0 <= k <= t.K:
        raise WeightError(f"level {k} outside 0..{t.K}")
    return t.levels[k]


def local_weight_coeff(t: WeightSequence, k: int, m: Sequence[int]) -> float:
    """t_{k,m} = ||t_k | L_p(Q_{k,m})||."""
    t_k = _check_level(t, k)
    return local_lp_norm(t_k, t.p, DyadicCube(k, tuple(m)))


def _scaled_lp(f: GridFunction, values: np.ndarray, k: int, c: float,
               exponent: float) -> np.ndarray:
    """(2^{kn} int_{cQ_{k,m}} values^exponent)^{1/exponent} for every rank-k cube."""
    if math.isinf(exponent):
        return cube_reduce(f, k, c, how="max", values=values)
    with np.errstate(over="ignore"):
        powered = values ** exponent
    sums = cube_reduce(f, k, c, values=powered) * f.cell_volume * 2.0 ** (k * f.dim)
    return sums ** (1.0 / exponent)


def weight_coefficients(t: WeightSequence, k: int) -> np.ndarray:
    """Array of t_{k,m} over the rank-k cubes of the box (axes follow cube_index_range)."""
    t_k = _check_level(t, k)
    return _scaled_lp(t_k, t_k.values, k, 1.0, t.p) * 2.0 ** (-k * t_k.dim / t.p)


def bar_transform(t: WeightSequence) -> WeightSequence:
    """t-bar_k = 2^{kn/p} sum_m t_{k,m} chi_{Q_{k,m}}, a piecewise constant sequence.

    On a cube where t_k is already constant the value is copied unchanged,
    so the transform is exactly idempotent.
    """
    levels = []
    for k, t_k in enumerate(t.levels):
        hi = cube_reduce(t_k, k, how="max")
        lo = cube_reduce(t_k, k, how="min")
        if math.isinf(t.p):
            bar = hi
        else:
            counts = cube_reduce(t_k, k, values=np.ones(t_k.shape))
            bar = (cube_reduce(t_k, k, values=t_k.values ** t.p) / counts) ** (1.0 / t.p)
        bar = np.where(hi == lo, hi, bar)
        levels.append(t_k.with_values(expand_cube_values(t_k, k, bar)))
    provenance = None
    if t.provenance is not None:
        provenance = t.provenance.model_copy(update={"bar": True})
    return t.replace_levels(levels, provenance)


def weighted_lp_terms(t: WeightSequence, layers: Sequence[np.ndarray], p: float,
                      first_level: int = 0) -> List[float]:
    """||t_k layer_k | L_p|| for k = first_level, first_level + 1, ..."""
    last = first_level + len(layers) - 1
    if last > t.K:
        raise WeightError(f"weight sequence has {t.K + 1} levels, level {last} requested")
    terms = []
    for offset, layer in enumerate(layers):
        t_k = t.levels[first_level + offset]
        if layer.shape != t_k.shape:
            raise GridError(f"layer shape {layer.shape} does not match the weight grid {t_k.shape}")
        terms.append(lp_norm_of_array(t_k.values * np.abs(layer), p, t_k.cell_volume))
    return terms


# class X


def _cube_m(f: GridFunction, k: int, index: Tuple[int, ...]) -> Tuple[int, ...]:
    m_axis = cube_index_range(f, k)
    return tuple(int(m_axis[i]) for i in index)


def _neighbour_exponent(coeffs: np.ndarray) -> Tuple[float, Tuple[int, ...]]:
    """Smallest a with c[m] <= 2^a c[m~] over all neighbouring index pairs."""
    logs = np.log2(coeffs)
    n = logs.ndim
    worst, where = 0.0, (0,) * n
    for offset in itertools.product((-1, 0, 1), repeat=n):
        nonzero = [o for o in offset if o != 0]
        if not nonzero or nonzero[0] < 0:
            continue
        a = tuple(slice(max(o, 0), logs.shape[i] + min(o, 0)) for i, o in enumerate(offset))
        b = tuple(slice(max(-o, 0), logs.shape[i] + min(-o, 0)) for i, o in enumerate(offset))
        diff = np.abs(logs[a] - logs[b])
        if diff.size and diff.max() > worst:
            worst = float(diff.max())
            where = tuple(int(i) for i in np.unravel_index(int(diff.argmax()), diff.shape))
    return worst, where


def _class_x_level(t: WeightSequence, k: int, k_max: int, c1: float, c2: float):
    """Worst lower- and upper-ratio conditions for a fixed k and all j in k..k_max."""
    t_k = t.levels[k]
    a_k = _scaled_lp(t_k, t_k.values, k, c1, t.p)
    worst1 = (-math.inf, (k, k, (0,) * t_k.dim))
    worst2 = (-math.inf, (k, k, (0,) * t_k.dim))
    for j in range(k, k_max + 1):
        t_j = t.levels[j]
        dual = _scaled_lp(t_j, 1.0 / t_j.values, k, c2, t.sigma1)
        upper = _scaled_lp(t_j, t_j.values, k, c2, t.sigma2)
        with np.errstate(over="ignore", invalid="ignore"):
            ratio1 = a_k * dual * t.alpha1[j] / t.alpha1[k]
            ratio2 = upper / a_k * t.alpha2[k] / t.alpha2[j]
        for ratio, slot in ((ratio1, 1), (ratio2, 2)):
            ratio = np.where(np.isnan(ratio), np.inf, ratio)
            idx = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
            value = float(ratio[idx])
            witness = (k, j, _cube_m(t_k, k, tuple(int(i) for i in idx)))
            if slot == 1 and value > worst1[0]:
                worst1 = (value, witness)
            if slot == 2 and value > worst2[0]:
                worst2 = (value, witness)
    exponent, where = _neighbour_exponent(weight_coefficients(t, k))
    return worst1, worst2, (exponent, (k, k, _cube_m(t_k, k, where)))


def _fit_class_x(t: WeightSequence, k_max: int, c1: float, c2: float,
                 label: str) -> ClassReport:
    per_level = parallel_map(lambda k: _class_x_level(t, k, k_max, c1, c2),
                             range(k_max + 1))
    C1, w1 = max((lvl[0] for lvl in per_level), key=lambda item: item[0])
    C2, w2 = max((lvl[1] for lvl in per_level), key=lambda item: item[0])
    a, w3 = max((lvl[2] for lvl in per_level), key=lambda item: item[0])
    report = ClassReport(
        member=False, C1=C1, C2=C2, C_alpha3=2.0 ** a,
        witness={"C1": w1, "C2": w2, "alpha3": w3}, label=label,
    )
    finite = all(math.isfinite(v) for v in (C1, C2, a))
    if not finite:
        report.notes.append("a fitted constant is infinite (weight integral overflow)")
    if a > t.alpha3 + 1e-9:
        report.notes.append(f"neighbour exponent {a:.6g} exceeds alpha3 {t.alpha3:.6g}")
    report.member = finite and a <= t.alpha3 + 1e-9
    return report


def _growth(old: ClassReport, new: ClassReport) -> float:
    pairs = [(old.C1, new.C1), (old.C2, new.C2),
             (math.log2(old.C_alpha3), math.log2(new.C_alpha3))]
    worst = 0.0
    for before, after in pairs:
        if not (math.isfinite(before) and math.isfinite(after)):
            return math.inf
        worst = max(worst, abs(after - before) / max(abs(before), 1.0))
    return worst


def _apply_stability(report: ClassReport, comparisons: List[Tuple[str, ClassReport]],
                     tol: float) -> ClassReport:
    if not comparisons:
        return report
    stable = True
    for name, other in comparisons:
        growth = _growth(report, other)
        if growth > tol:
            stable = False
            report.notes.append(f"constants grow by {growth:.3%} under {name}")
    report.stable = stable
    report.member = report.member and stable
    if not stable:
        logger.warning("class %s check unstable: %s", report.label, "; ".join(report.notes))
    return report


def check_class_X(t: WeightSequence, k_max: Optional[int] = None, c1: float = 1.0,
                  c2: float = 1.0, stability_tol: float = STABILITY_TOL,
                  refine: bool = True, label: str = "X") -> ClassReport:
    """Fit C1 (dual ratio), C2 (upper ratio) and the neighbour exponent of {t_k}.

    ``c1``/``c2`` enlarge the cubes of the t_k^p and the dual integrals.
    With ``refine`` the fit is repeated one grid level finer (generator
    sequences) and two levels further (when the sequence has them).
    """
    k_max = t.K if k_max is None else k_max
    if not 0 <= k_max <= t.K:
        raise WeightError(f"k_max {k_max} outside 0..{t.K}")
    if c1 < 1 or c2 < 1:
        raise WeightError("cube scales c1, c2 must be >= 1")
    report = _fit_class_x(t, k_max, c1, c2, label)
    comparisons = []
    if refine:
        finer = t.refined()
        if finer is not None:
            comparisons.append(("grid refinement", _fit_class_x(finer, k_max, c1, c2, label)))
        if k_max + 2 <= t.K:
            comparisons.append(("k_max + 2", _fit_class_x(t, k_max + 2, c1, c2, label)))
    return _apply_stability(report, comparisons, stability_tol)


def check_class_X_bar(t: WeightSequence, k_max: Optional[int] = None, c1: float = 1.0,
                      c2: float = 1.0, stability_tol: float = STABILITY_TOL,
                      refine: bool = True) -> ClassReport:
    """Class X conditions for the barred sequence {t-bar_k}."""
    return check_class_X(bar_transform(t), k_max, c1, c2, stability_tol, refine,
                         label="X_bar")


@dataclass
class HolderReport:
    max_violation: float
    sigma1: float
    worst: Tuple[int, Tuple[int, ...]] = (0, ())
    checked_cubes: int = 0


def verify_holder_identity(t: WeightSequence, theta: float,
                           k_max: Optional[int] = None) -> HolderReport:
    """2^{-kn/theta} <= ||t_k|L_p(Q)|| ||t_k^{-1}|L_sigma1(Q)||, sigma1 = theta (p/theta)'.

    Returns the largest relative violation over all cubes, 0 when the
    inequality holds everywhere.
    """
    if not 0 < theta <= t.p:
        raise WeightError(f"theta must lie in (0, p], got {theta}")
    sigma1 = theta * conjugate_exponent(t.p / theta)
    k_max = t.K if k_max is None else k_max
    worst, where, count = 0.0, (0, ()), 0
    for k in range(k_max + 1):
        t_k = t.levels[k]
        unscale = 2.0 ** (-k * t_k.dim)
        own = _scaled_lp(t_k, t_k.values, k, 1.0, t.p) * unscale ** (1.0 / t.p)
        dual = _scaled_lp(t_k, 1.0 / t_k.values, k, 1.0, sigma1) * unscale ** (1.0 / sigma1)
        lower = unscale ** (1.0 / theta)
        violation = np.maximum(0.0, (lower - own * dual) / lower)
        count += violation.size
        idx = np.unravel_index(int(np.argmax(violation)), violation.shape)
        if violation[idx] > worst:
            worst = float(violation[idx])
            where = (k, _cube_m(t_k, k, tuple(int(i) for i in idx)))
    return HolderReport(worst, sigma1, where, count)


# class Y


def _fitted_slope(alpha: Sequence[float]) -> float:
    if len(alpha) < 2:
        return 0.0
    return (math.log2(alpha[-1]) - math.log2(alpha[0])) / (len(alpha) - 1)


def _fit_ratio_bounds(s: WeightSequence, k_max: int, alpha1: float,
                      alpha2: float) -> Tuple[float, Tuple[int, int, Tuple[int, ...]]]:
    """Smallest C1 with 2^{a1(k-l)}/C1 <= s_k/s_l <= C1 2^{a2(k-l)}, l <= k."""
    logs = [np.log2(s.levels[k].values) for k in range(k_max + 1)]
    worst, witness = 0.0, (0, 0, (0,) * s.grid.dim)
    for k in range(k_max + 1):
        for l in range(k + 1):
            d = logs[k] - logs[l]
            excess = np.maximum(d - alpha2 * (k - l), alpha1 * (k - l) - d)
            idx = np.unravel_index(int(np.argmax(excess)), excess.shape)
            if excess[idx] > worst:
                worst = float(excess[idx])
                witness = (k, l, tuple(int(i) for i in idx))
    return 2.0 ** worst, witness


def _sampled_points(f: GridFunction, limit: int) -> Tuple[np.ndarray, np.ndarray]:
    total = f.values.size
    flat = np.arange(total)
    if total > limit:
        flat = np.unique(np.linspace(0, total - 1, limit).round().astype(int))
    index = np.stack(np.unravel_index(flat, f.shape), axis=1)
    points = -f.box_radius + (index + 0.5) * f.spacing
    return flat, points


def _fit_pair_constant(s: WeightSequence, k_max: int, alpha3: float):
    """Smallest C2 with s_k(x) <= C2 s_k(y) (1 + 2^k |x - y|)^alpha3 over sampled pairs."""
    flat, points = _sampled_points(s.grid, Y_PAIR_SAMPLES)
    worst, witness = 0.0, (0, 0, (0,) * s.grid.dim)
    for k in range(k_max + 1):
        logs = np.log2(s.levels[k].values.ravel()[flat])
        for start in range(0, flat.size, _PAIR_CHUNK):
            block = slice(start, start + _PAIR_CHUNK)
            dist = np.linalg.norm(points[block, None, :] - points[None, :, :], axis=-1)
            excess = logs[block, None] - logs[None, :] - alpha3 * np.log2(1.0 + 2.0 ** k * dist)
            i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
            if excess[i, j] > worst:
                worst = float(excess[i, j])
                x_idx = np.unravel_index(int(flat[start + i]), s.grid.shape)
                witness = (k, k, tuple(int(v) for v in x_idx))
    return 2.0 ** worst, witness


def check_class_Y(s: WeightSequence, k_max: Optional[int] = None,
                  alpha1: Optional[float] = None, alpha2: Optional[float] = None,
                  alpha3: Optional[float] = None) -> ClassReport:
    """Fit C1 and C2 of the class Y^{alpha3}_{alpha1, alpha2}.

    Scalar exponents default to the log2 slopes of ``s.alpha1``/``s.alpha2``
    and to ``s.alpha3``. Point pairs for C2 are subsampled to at most
    ``Y_PAIR_SAMPLES`` grid points.
    """
    k_max = s.K if k_max is None else k_max
    alpha1 = _fitted_slope(s.alpha1) if alpha1 is None else alpha1
    alpha2 = _fitted_slope(s.alpha2) if alpha2 is None else alpha2
    alpha3 = s.alpha3 if alpha3 is None else alpha3
    if alpha1 > alpha2:
        raise WeightError(f"class Y needs alpha1 <= alpha2, got {alpha1} > {alpha2}")
    C1, w1 = _fit_ratio_bounds(s, k_max, alpha1, alpha2)
    C2, w2 = _fit_pair_constant(s, k_max, alpha3)
    finite = math.isfinite(C1) and math.isfinite(C2)
    return ClassReport(member=finite, C1=C1, C2=C2, C_alpha3=2.0 ** alpha3,
                       witness={"C1": w1, "C2": w2}, label="Y")


def check_class_loc_Y(s: WeightSequence, k_max: Optional[int] = None,
                      alpha1: Optional[float] = None, alpha2: Optional[float] = None,
                      alpha3: Optional[float] = None) -> ClassReport:
    """Class locY: condition 2 becomes s_k(x) <= C2 s_k(y) 2^{k alpha3} for |x - y| <= 2^-k."""
    k_max = s.K if k_max is None else k_max
    alpha1 = _fitted_slope(s.alpha1) if alpha1 is None else alpha1
    alpha2 = _fitted_slope(s.alpha2) if alpha2 is None else alpha2
    alpha3 = s.alpha3 if alpha3 is None else alpha3
    C1, w1 = _fit_ratio_bounds(s, k_max, alpha1, alpha2)
    worst, w2 = 0.0, (0, 0, (0,) * s.grid.dim)
    for k in range(k_max + 1):
        s_k = s.levels[k]
        reach = int(math.floor(2.0 ** (-k) / s_k.spacing + 1e-9))
        nearby = ndimage.minimum_filter(s_k.values, size=2 * reach + 1, mode="nearest")
        excess = np.log2(s_k.values) - np.log2(nearby) - k * alpha3
        idx = np.unravel_index(int(np.argmax(excess)), excess.shape)
        if excess[idx] > worst:
            worst = float(excess[idx])
            w2 = (k, k, tuple(int(i) for i in idx))
    C2 = 2.0 ** worst
    return ClassReport(member=math.isfinite(C1) and math.isfinite(C2), C1=C1, C2=C2,
                       C_alpha3=2.0 ** alpha3, witness={"C1": w1, "C2": w2},
                       label="locY")


# local Muckenhoupt


def check_ap_loc(w: GridFunction, u: float, side_cap: float = 1.0) -> float:
    """sup over dyadic cubes of side <= side_cap of avg(w) avg(w^{-1/(u-1)})^{u-1}.

    u = inf uses avg(w) exp(avg log(1/w)). Cubes cut by the box boundary use
    averages over their part inside the box.
    """
    if not u > 1:
        raise WeightError(f"A_u^loc needs u > 1, got {u}")
    if np.any(w.values <= 0):
        raise WeightError("A_u^loc weight must be positive")
    if side_cap <= 0:
        raise WeightError("side cap must be positive")
    k_min = math.ceil(-math.log2(side_cap) - 1e-12)
    ones = np.ones(w.shape)
    if math.isinf(u):
        dual_values = np.log(1.0 / w.values)
    else:
        dual_values = w.values ** (-1.0 / (u - 1.0))
    worst = 0.0
    for k in range(k_min, w.level + 1):
        counts = cube_reduce(w, k, values=ones)
        keep = counts > 0
        avg_w = cube_reduce(w, k)[keep] / counts[keep]
        avg_dual = cube_reduce(w, k, values=dual_values)[keep] / counts[keep]
        if math.isinf(u):
            value = avg_w * np.exp(avg_dual)
        else:
            value = avg_w * avg_dual ** (u - 1.0)
        worst = max(worst, float(value.max()))
    logger.debug("A_%s^loc constant %.6g (side cap %s)", u, worst, side_cap)
    return worst


# construction


def _power_values(gen: WeightGenerator, f: GridFunction) -> np.ndarray:
    coords = f.coordinates()
    radius = np.sqrt(sum((c - gen.center) ** 2 for c in coords))
    radius = np.broadcast_to(radius, f.shape)
    if gen.beta != 0 and np.any(radius == 0):
        raise WeightError(f"power weight centre {gen.center} falls on a grid point")
    return radius ** gen.beta if gen.beta != 0 else np.ones(f.shape)


def weights_from_generator(gen: WeightGenerator) -> WeightSequence:
    """Materialise a generator recipe on its grid."""
    p = gen.p
    r = gen.r if gen.r is not None else p / 2.0
    if not 0 < r <= p:
        raise WeightError(f"need 0 < r <= p, got r={r}, p={p}")
    sigma1 = gen.sigma1 if gen.sigma1 is not None else r * conjugate_exponent(p / r)
    sigma2 = gen.sigma2 if gen.sigma2 is not None else p

    if gen.kind == "custom_grid":
        if not gen.paths:
            raise WeightError("custom_grid weights need one CSV path per level")
        levels = [GridFunction.from_csv(path) for path in gen.paths]
    else:
        if gen.K > gen.level:
            raise ResolutionError(f"level cap K={gen.K} exceeds grid level J={gen.level}")
        base = GridFunction.zeros(gen.dim, gen.box_radius, gen.level)
        profile = _power_values(gen, base) if gen.kind != "two_ks" else np.ones(base.shape)
        levels = [base.with_values(2.0 ** (k * gen.s) * profile) for k in range(gen.K + 1)]

    alpha = tuple(2.0 ** (k * gen.s) for k in range(len(levels)))
    t = WeightSequence(tuple(levels), p, sigma1, sigma2, alpha, alpha, 0.0, gen)
    if gen.kind == "averaged_power" or gen.bar:
        t = bar_transform(t)
    exponent = max(_neighbour_exponent(weight_coefficients(t, k))[0] for k in range(t.K + 1))
    alpha3 = math.ceil(exponent * 1000.0 - 1e-9) / 1000.0
    logger.debug("weights %s: K=%d J=%d sigma1=%s alpha3=%s", gen.kind, t.K,
                 t.grid.level, sigma1, alpha3)
    return WeightSequence(t.levels, p, sigma1, sigma2, alpha, alpha, alpha3, gen)


def make_weights(kind: str, **params) -> WeightSequence:
    """Build a weight sequence of ``kind`` (see ``config.WEIGHT_KINDS``)."""
    try:
        gen = WeightGenerator(kind=kind, **params)
    except ValueError as exc:
        raise WeightError(f"invalid weight parameters: {exc}") from exc
    return weights_from_generator(gen)


# manifests


def _exponent_text(value: float):
    return "inf" if math.isinf(value) else value


def save_weights(t: WeightSequence, path: Union[str, Path], embed_levels: bool = False) -> Path:
    """Write a JSON manifest; levels go to CSV files beside it unless a generator is kept."""
    path = Path(path)
    ensure_directory(path.parent)
    levels: List[str] = []
    generator = None
    if t.provenance is not None and not embed_levels:
        generator = t.provenance.model_dump()
    else:
        for k, t_k in enumerate(t.levels):
            csv_path = path.with_name(f"{path.stem}_t{k}.csv")
            t_k.to_csv(csv_path)
            levels.append(csv_path.name)
    payload: Dict = {
        "schema": 1,
        "p": _exponent_text(t.p),
        "sigma1": _exponent_text(t.sigma1),
        "sigma2": _exponent_text(t.sigma2),
        "alpha1": list(t.alpha1),
        "alpha2": list(t.alpha2),
        "alpha3": t.alpha3,
        "levels": levels,
    }
    if generator is not None:
        for key in ("p", "r", "sigma1", "sigma2"):
            if isinstance(generator.get(key), float) and math.isinf(generator[key]):
                generator[key] = "inf"
        payload["generator"] = generator
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return path


def load_weights(path: Union[str, Path]) -> WeightSequence:
    path = Path(path)
    try:
        manifest = WeightManifest.model_validate(json.loads(path.read_text()))
    except (OSError, ValueError) as exc:
        raise WeightError(f"cannot read weight manifest {path}: {exc}") from exc
    if manifest.generator is not None:
        t = weights_from_generator(manifest.generator)
        return WeightSequence(t.levels, manifest.p, manifest.sigma1, manifest.sigma2,
                              manifest.alpha1, manifest.alpha2, manifest.alpha3,
                              manifest.generator)
    levels = [GridFunction.from_csv(path.parent / name) for name in manifest.levels]
    return WeightSequence(tuple(levels), manifest.p, manifest.sigma1, manifest.sigma2,
                          manifest.alpha1, manifest.alpha2, manifest.alpha3)
