# varbesov/experiments/harness.py
"""Norm-equivalence, embedding and trace experiments over a corpus.

Every experiment re-derives its hypotheses from the weight-class and Hardy
checks in :mod:`varbesov.experiments.hypotheses` and refuses to run when one
fails, unless forced; a forced report is marked UNSAFE. A verdict of PASS
always rests on two grid levels J and J + 1, never on one.
"""

import dataclasses
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..analysis.convolution import (
    Mollifier,
    block_increments,
    build_mollifier,
    conv_field,
    conv_norm,
    geometric_rate,
    reconstruction_error,
)
from ..analysis.differences import averaged_diff_norm, diff_norm
from ..analysis.fourier import fourier_lp_norm
from ..analysis.splines import coeff_norm, spline_decompose
from ..analysis.trace import trace_experiment
from ..analysis.weights import WeightSequence, bar_transform, weights_from_generator
from ..config import CorpusConfig, ExperimentConfig, MollifierConfig, NormParams, NormSpec
from ..core.error_handling import (
    ErrorLog,
    GridError,
    HypothesisError,
    HypothesisViolation,
    VarBesovError,
)
from ..core.grid import GridFunction
from ..core.models import NormKind, NormValue, RatioSummary
from ..utils import ensure_directory, format_float, parallel_map, write_csv
from . import hypotheses
from .corpus import Corpus, generate_corpus
from .monitoring import RunMonitor

logger = logging.getLogger(__name__)

REPORT_HEADER = ("function_id", "norm_type", "value", "K", "J", "tail_fraction")
EMBED_MAX_RATE = 0.75
RECONSTRUCTION_FLOOR = 1e-12
TRACE_MAX_DRIFT = 0.25

Row = Tuple[str, str, float, int, int, float]


# norm evaluation


def norm_params(spec: NormSpec, base: NormParams) -> NormParams:
    """``base`` with the per-norm overrides of ``spec`` applied."""
    update = {name: getattr(spec, name) for name in ("l", "r") if getattr(spec, name) is not None}
    return base.model_copy(update=update)


def weights_at(t: WeightSequence, grid: GridFunction) -> WeightSequence:
    """``t`` on the grid of ``grid``, regenerated from its recipe when needed."""
    if t.grid.same_grid(grid):
        return t
    if t.provenance is None:
        raise GridError(
            f"weights on level {t.grid.level} cannot be moved to level {grid.level} "
            "without a generator"
        )
    return weights_from_generator(t.provenance.model_copy(
        update={"level": grid.level, "box_radius": grid.box_radius, "dim": grid.dim}
    ))


class MollifierCache:
    """One mollifier per (M, support radius, dim, level)."""

    def __init__(self, default: MollifierConfig):
        self.default = default
        self._built: Dict[Tuple[int, float, int, int], Mollifier] = {}

    def get(self, spec: NormSpec, dim: int, level: int) -> Mollifier:
        cfg = spec.mollifier or self.default
        key = (cfg.M, cfg.support_radius, dim, level)
        if key not in self._built:
            self._built[key] = build_mollifier(dim, cfg.M, cfg.support_radius, level)
        return self._built[key]


def evaluate_norm(spec: NormSpec, f: GridFunction, t: WeightSequence, params: NormParams,
                  mol: Optional[Mollifier] = None) -> NormValue:
    kind = NormKind(spec.kind)
    if spec.bar:
        t = bar_transform(t)
    if kind is NormKind.CONV:
        if mol is None:
            raise GridError("the convolution norm needs a mollifier")
        return conv_norm(f, t, mol, params)
    if kind is NormKind.DIFF:
        return diff_norm(f, t, params)
    if kind is NormKind.AVGDIFF:
        return averaged_diff_norm(f, t, params)
    if kind is NormKind.SPLINE:
        dec = spline_decompose(f, params.l, params.K, params.r)
        return coeff_norm(dec, t, params.p, params.q)
    return fourier_lp_norm(f, t, params.p, params.q, params.K)


# hypothesis gating


def _tagged(name: str, found: Sequence[HypothesisViolation]) -> List[HypothesisViolation]:
    return [dataclasses.replace(v, condition=f"[{name}] {v.condition}") for v in found]


def norm_violations(spec: NormSpec, t: WeightSequence, params: NormParams,
                    config: ExperimentConfig, mol: Optional[Mollifier] = None,
                    L_phi: Optional[int] = None) -> List[HypothesisViolation]:
    """Violated hypotheses for comparing ``spec`` with the other norms of a run."""
    mu = config.mu if config.mu is not None else hypotheses.default_mu(params.q, params.r)
    if spec.bar:
        t = bar_transform(t)
    kind = NormKind(spec.kind)
    if kind is NormKind.CONV:
        A = config.A if config.A is not None else hypotheses.default_A(t)
        found = hypotheses.conv_violations(t, params, A, mu, mol.L_phi if mol else None)
    elif kind in (NormKind.DIFF, NormKind.AVGDIFF):
        found = hypotheses.diff_violations(t, params, mu, L_phi)
    elif kind is NormKind.SPLINE:
        found = hypotheses.spline_violations(t, params, mu, config.theta)
    else:
        A = config.A if config.A is not None else hypotheses.default_A(t)
        found = hypotheses.conv_violations(t, params, A, mu)
    return _tagged(spec.name, found)


def _gate(violations: List[HypothesisViolation], force: bool, component: str) -> bool:
    """True when the run is UNSAFE; raises when refused."""
    if not violations:
        return False
    for v in violations:
        logger.warning("hypothesis violated: %s", v)
    if not force:
        raise HypothesisError(violations, component=component)
    logger.warning("running %s with violated hypotheses (UNSAFE)", component)
    return True


# equivalence


@dataclass(frozen=True)
class PairSummary:
    """Ratios N_a / N_b over the corpus at J and, if available, at J + 1."""

    norm_a: str
    norm_b: str
    coarse: RatioSummary
    fine: Optional[RatioSummary] = None

    @staticmethod
    def spread_of(summary: Optional[RatioSummary]) -> float:
        if summary is None or not summary.ratios:
            return math.nan
        if summary.low <= 0:
            return math.inf
        return summary.high / summary.low

    @property
    def spread(self) -> float:
        return self.spread_of(self.coarse)

    @property
    def drift(self) -> float:
        coarse, fine = self.spread, self.spread_of(self.fine)
        if not (math.isfinite(coarse) and math.isfinite(fine)):
            return math.nan
        return abs(fine / coarse - 1.0)

    def passed(self, max_drift: float) -> bool:
        if not self.coarse.ratios:
            return self.fine is not None
        return math.isfinite(self.spread) and self.drift < max_drift

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair": [self.norm_a, self.norm_b],
            "low": self.coarse.low,
            "high": self.coarse.high,
            "spread": self.spread,
            "fine_spread": self.spread_of(self.fine),
            "drift": self.drift,
            "skipped": self.coarse.skipped,
        }


@dataclass
class EquivalenceReport:
    rows: List[Row]
    pairs: List[PairSummary]
    verdict: str
    unsafe: bool = False
    violations: List[str] = field(default_factory=list)
    errors: ErrorLog = field(default_factory=ErrorLog)
    timings: Dict[str, Dict[str, float]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def values(self, level: int) -> Dict[Tuple[str, str], float]:
        return {(row[0], row[1]): row[2] for row in self.rows if row[4] == level}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "unsafe": self.unsafe,
            "violations": self.violations,
            "pairs": [pair.to_dict() for pair in self.pairs],
            "errors": [
                {**dataclasses.asdict(e), "severity": e.severity.value}
                for e in self.errors.entries
            ],
            "timings": self.timings,
        }


def _evaluate_level(corpus: Corpus, norms: Sequence[NormSpec], t: WeightSequence,
                    config: ExperimentConfig, cache: MollifierCache, monitor: RunMonitor,
                    errors: ErrorLog) -> List[Row]:
    level = corpus.config.level
    grid = corpus.functions[0]
    t = weights_at(t, grid)
    plans = []
    for spec in norms:
        mol = cache.get(spec, grid.dim, level) if spec.kind == "conv" else None
        plans.append((spec, norm_params(spec, config.params), mol))

    def run(entry) -> List[Row]:
        rows = []
        for spec, params, mol in plans:
            try:
                with monitor.timed(entry.id, spec.name, level) as record:
                    value = evaluate_norm(spec, entry.function, t, params, mol)
                    record.value = value.value
                rows.append((entry.id, spec.name, value.value, params.K, level,
                             value.tail_fraction))
            except VarBesovError as exc:
                errors.record(exc)
                rows.append((entry.id, spec.name, math.nan, params.K, level, math.nan))
        return rows

    return [row for rows in parallel_map(run, list(corpus)) for row in rows]


def _pair_summaries(norms: Sequence[NormSpec], rows: List[Row],
                    levels: Sequence[int]) -> List[PairSummary]:
    table: Dict[int, Dict[str, Dict[str, float]]] = {}
    for fid, name, value, _, level, _ in rows:
        table.setdefault(level, {}).setdefault(name, {})[fid] = value
    out = []
    for a, b in itertools.combinations([spec.name for spec in norms], 2):
        summaries = []
        for level in levels:
            va, vb = table[level][a], table[level][b]
            summaries.append(RatioSummary.from_pairs((va[fid], vb[fid]) for fid in sorted(va)))
        out.append(PairSummary(a, b, summaries[0], summaries[1] if len(summaries) > 1 else None))
    return out


def equivalence_run(corpus: Corpus, norms: Sequence[NormSpec], t: WeightSequence,
                    config: ExperimentConfig, force: Optional[bool] = None,
                    monitor: Optional[RunMonitor] = None) -> EquivalenceReport:
    """Pairwise ratio spreads of ``norms`` over ``corpus`` at J and J + 1."""
    if not norms:
        raise GridError("an equivalence run needs at least one norm")
    names = [spec.name for spec in norms]
    if len(set(names)) != len(names):
        raise GridError(f"norm labels must be unique, got {names}")
    force = config.force if force is None else force
    monitor = monitor or RunMonitor()
    cache = MollifierCache(config.mollifier)
    grid = corpus.functions[0]
    t_coarse = weights_at(t, grid)

    conv_specs = [spec for spec in norms if spec.kind == "conv"]
    L_phi = cache.get(conv_specs[0], grid.dim, grid.level).L_phi if conv_specs else None
    violations = []
    for spec in norms:
        mol = cache.get(spec, grid.dim, grid.level) if spec.kind == "conv" else None
        violations.extend(norm_violations(spec, t_coarse, norm_params(spec, config.params),
                                          config, mol, L_phi))
    unsafe = _gate(violations, force, "equivalence")

    errors = ErrorLog()
    levels = [grid.level]
    rows = _evaluate_level(corpus, norms, t_coarse, config, cache, monitor, errors)
    if config.refine:
        fine = corpus.at_level(grid.level + 1)
        try:
            rows += _evaluate_level(fine, norms, t, config, cache, monitor, errors)
            levels.append(grid.level + 1)
        except VarBesovError as exc:
            errors.record(exc)
    rows.sort(key=lambda row: (row[0], row[1], row[4]))

    pairs = _pair_summaries(norms, rows, levels)
    values_ok = all(math.isfinite(row[2]) for row in rows)
    refined = len(levels) == 2
    passed = values_ok and refined and not errors and all(
        pair.passed(config.pass_drift) for pair in pairs
    )
    verdict = "PASS" if passed else "FAIL"
    logger.info("equivalence run over %d functions: %s%s", len(corpus), verdict,
                " (UNSAFE)" if unsafe else "")
    return EquivalenceReport(rows, pairs, verdict, unsafe, [str(v) for v in violations],
                             errors, monitor.summary())


def write_report(report: Union["EquivalenceReport", "EmbeddingReport"],
                 directory: Union[str, Path]) -> Path:
    """``report.csv`` plus the ``report.json`` sidecar; returns the CSV path."""
    directory = ensure_directory(directory)
    path = write_csv(directory / "report.csv", REPORT_HEADER, report.rows)
    sidecar = directory / "report.json"
    sidecar.write_text(json.dumps(_json_safe(report.to_dict()), indent=2, sort_keys=True) + "\n")
    return path


def _json_safe(value):
    if isinstance(value, float):
        return value if math.isfinite(value) else format_float(value)
    if isinstance(value, dict):
        return {str(k): _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


# embedding


@dataclass
class EmbeddingReport:
    """Tail-block decay rates and reconstruction errors per grid level.

    The J + 1 run keeps the rate window 1..K and adds the layer K + 1 to
    the partial sums, so its reconstruction error must not grow.
    """

    rows: List[Row]
    rates: Dict[int, Dict[str, float]]
    reconstruction: Dict[int, Dict[str, float]]
    unsafe: bool = False
    violations: List[str] = field(default_factory=list)
    errors: ErrorLog = field(default_factory=ErrorLog)
    max_drift: float = 0.15

    @property
    def levels(self) -> List[int]:
        return sorted(self.rates)

    def rate_drift(self, fid: str) -> float:
        if len(self.levels) < 2:
            return math.nan
        coarse, fine = (self.rates[level].get(fid, math.nan) for level in self.levels[:2])
        if not (math.isfinite(coarse) and math.isfinite(fine)) or coarse == 0:
            return math.nan
        return abs(fine / coarse - 1.0)

    @property
    def failures(self) -> List[str]:
        """Reasons the run does not PASS; empty when it does."""
        if len(self.levels) < 2:
            return ["only one grid level was evaluated"]
        out = [f"{e.component}: {e.message}" for e in self.errors.entries]
        coarse, fine = self.levels[:2]
        for fid in sorted(self.rates[coarse]):
            for level in (coarse, fine):
                rate = self.rates[level].get(fid, math.nan)
                if not rate <= EMBED_MAX_RATE:
                    out.append(f"{fid}: decay rate {format_float(rate)} at J={level} "
                               f"is not <= {EMBED_MAX_RATE}")
            drift = self.rate_drift(fid)
            if not drift < self.max_drift:
                out.append(f"{fid}: decay rate drifts by {format_float(drift)} "
                           f"from J={coarse} to J={fine}")
            err_coarse = self.reconstruction[coarse].get(fid, math.nan)
            err_fine = self.reconstruction[fine].get(fid, math.nan)
            if not err_fine <= err_coarse + RECONSTRUCTION_FLOOR:
                out.append(f"{fid}: reconstruction error grows from {format_float(err_coarse)} "
                           f"to {format_float(err_fine)}")
        return out

    @property
    def verdict(self) -> str:
        return "FAIL" if self.failures else "PASS"

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict,
            "unsafe": self.unsafe,
            "violations": self.violations,
            "failures": self.failures,
            "rates": self.rates,
            "reconstruction": self.reconstruction,
        }


def tail_rate(increments: Sequence[float]) -> float:
    """Geometric rate of the increments from their largest one onwards."""
    if not increments:
        return math.nan
    peak = int(np.argmax(increments))
    return geometric_rate(increments[peak:])


def _embedding_level(corpus: Corpus, mol: Mollifier, r: float, K: int,
                     window: int) -> Dict[str, Tuple[float, float]]:
    def run(entry) -> Tuple[str, float, float]:
        cf = conv_field(entry.function, mol, K)
        blocks = [float(np.max(b)) if b.size else 0.0
                  for b in block_increments(cf, r, stop=window)]
        return entry.id, tail_rate(blocks), reconstruction_error(entry.function, cf, r)

    return {fid: (rate, err) for fid, rate, err in parallel_map(run, list(corpus))}


def embedding_run(corpus: Corpus, t: WeightSequence, mol: Mollifier, r: float,
                  config: ExperimentConfig, force: Optional[bool] = None) -> EmbeddingReport:
    """Decay in J1 of ||sum_{j=J1}^{K} phi_j * f | L_r(Q_{0,m})||, at J and J + 1.

    ``mol`` is sampled at the corpus level; the J + 1 mollifier is rebuilt
    from its moment order and support.
    """
    force = config.force if force is None else force
    params = config.params.model_copy(update={"r": r})
    grid = corpus.functions[0]
    if mol.level != grid.level or mol.dim != grid.dim:
        raise GridError(
            f"mismatched grids: mollifier at dim {mol.dim} level {mol.level}, "
            f"corpus at dim {grid.dim} level {grid.level}"
        )
    t = weights_at(t, grid)
    mu = config.mu if config.mu is not None else hypotheses.default_mu(params.q, r)
    found = hypotheses.embedding_violations(t, params, mu, config.theta)
    unsafe = _gate(found, force, "embedding")

    K = params.K
    results = {grid.level: _embedding_level(corpus, mol, r, K, K)}
    errors = ErrorLog()
    if config.refine:
        level = grid.level + 1
        try:
            fine_mol = build_mollifier(mol.dim, mol.M_requested, mol.support_radius, level)
            results[level] = _embedding_level(corpus.at_level(level), fine_mol, r, K + 1, K)
        except VarBesovError as exc:
            errors.record(exc)

    rows, rates, reconstruction = [], {}, {}
    for level, by_id in results.items():
        layers = K if level == grid.level else K + 1
        rates[level] = {fid: rate for fid, (rate, _) in by_id.items()}
        reconstruction[level] = {fid: err for fid, (_, err) in by_id.items()}
        for fid, (rate, err) in by_id.items():
            rows.append((fid, "decay_rate", rate, K, level, 0.0))
            rows.append((fid, "reconstruction_error", err, layers, level, 0.0))
    rows.sort(key=lambda row: (row[0], row[1], row[4]))
    report = EmbeddingReport(rows, rates, reconstruction, unsafe, [str(v) for v in found],
                             errors, config.pass_drift)
    for reason in report.failures:
        logger.info("embedding: %s", reason)
    logger.info("embedding run over %d functions: %s%s", len(corpus), report.verdict,
                " (UNSAFE)" if unsafe else "")
    return report


# trace


@dataclass
class TraceRunReport:
    ratios: Dict[int, Dict[str, float]]

    @property
    def levels(self) -> List[int]:
        return sorted(self.ratios)

    def bound(self, level: int) -> float:
        return max(self.ratios[level].values(), default=0.0)

    @property
    def drift(self) -> float:
        if len(self.levels) < 2:
            return math.nan
        coarse, fine = (self.bound(level) for level in self.levels[:2])
        if coarse == 0:
            return 0.0 if fine == 0 else math.inf
        return abs(fine / coarse - 1.0)

    @property
    def passed(self) -> bool:
        finite = all(math.isfinite(v) for by_id in self.ratios.values() for v in by_id.values())
        return finite and self.drift < TRACE_MAX_DRIFT


def normal_power_weight(grid: GridFunction, exponent: float, trace_dim: int = 1) -> GridFunction:
    """gamma(x) = |x''|^exponent on the normal variables (gamma = 1 for exponent 0)."""
    if exponent == 0:
        return grid.with_values(np.ones(grid.shape))
    coords = grid.coordinates()[trace_dim:]
    radius = np.broadcast_to(np.sqrt(sum(c ** 2 for c in coords)), grid.shape)
    return grid.with_values(radius ** exponent)


def trace_run(config: CorpusConfig, p: float, l: int, K: int, exponent: float = 0.0,
              trace_dim: int = 1, refine: bool = True) -> TraceRunReport:
    """trace_experiment ratios for a corpus at J (and J + 1)."""
    levels = [config.level, config.level + 1] if refine else [config.level]
    ratios = {}
    for level in levels:
        corpus = generate_corpus(config.model_copy(update={"level": level}))
        gamma = normal_power_weight(corpus.functions[0], exponent, trace_dim)
        results = parallel_map(
            lambda entry: trace_experiment(entry.function, gamma, p, l, K, trace_dim), list(corpus)
        )
        ratios[level] = {entry.id: res.ratio for entry, res in zip(corpus, results)}
    return TraceRunReport(ratios)
