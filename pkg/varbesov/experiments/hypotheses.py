# varbesov/experiments/hypotheses.py
"""Hypothesis checks for the norm-comparison experiments.

Each ``*_violations`` function returns the list of unsatisfied conditions;
an empty list means the experiment may run. Hardy-type conditions are
decided with :func:`hardy_stability` on sequences built in log space from
the weight's alpha sequences, extended geometrically past level K.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..analysis.sequences import (
    PositiveSequence,
    conjugate_exponent,
    extend_geometric,
    hardy_stability,
    lq_norm,
)
from ..analysis.weights import WeightSequence, check_ap_loc, check_class_X, check_class_X_bar
from ..config import NormParams
from ..core.error_handling import HypothesisViolation
from ..core.grid import GridFunction
from ..core.models import Direction, Verdict

logger = logging.getLogger(__name__)

AP_LOC_CAP = 1e6
SIGMA_RTOL = 1e-9
_LN2 = math.log(2.0)


def default_mu(q: float, r: float) -> float:
    return min(1.0, q, r)


def alpha_slope(alpha: Sequence[float]) -> float:
    """Mean log2 growth per level of an alpha sequence."""
    if len(alpha) < 2:
        return 0.0
    return (math.log2(alpha[-1]) - math.log2(alpha[0])) / (len(alpha) - 1)


def default_A(t: WeightSequence) -> float:
    """Smallest round A > 0 making 2^{kA} alpha1_k grow geometrically."""
    return max(1.0, 1.0 - alpha_slope(t.alpha1))


def beta_sequence(alpha: Sequence[float], slope: float, mu: float,
                  exponent: float = 1.0) -> Callable[[int], PositiveSequence]:
    """Factory for beta_k = (2^{k slope} alpha_k^exponent)^mu of any length."""

    def make(length: int) -> PositiveSequence:
        extended = extend_geometric(alpha, length).log_terms
        levels = np.arange(length) * slope * _LN2
        return PositiveSequence(mu * (levels + exponent * extended))

    return make


def hardy_violation(name: str, make_beta: Callable[[int], PositiveSequence], s: float,
                    direction: Direction) -> Optional[HypothesisViolation]:
    verdict, _, large = hardy_stability(make_beta, s, direction)
    label = "tail" if direction is Direction.TAIL else "head"
    if verdict is Verdict.DIVERGENT:
        return HypothesisViolation(
            condition=f"{label} Hardy condition sup diverges for beta_k = {name}",
            detail=f"s = {s:g}; value grows under n_max doubling",
            value=large,
        )
    if verdict is Verdict.INCONCLUSIVE:
        logger.warning("%s Hardy condition for %s is inconclusive (value %.6g)", label,
                       name, large)
    return None


def _exponent_violations(params: NormParams, mu: float, cap: float,
                         cap_name: str) -> List[HypothesisViolation]:
    out = []
    if not 0 < mu <= cap + 1e-12:
        out.append(HypothesisViolation(f"mu in (0, {cap_name}]", f"mu = {mu:g}", mu))
    if params.r > params.p:
        out.append(HypothesisViolation("r <= p", f"r = {params.r:g}, p = {params.p:g}"))
    return out


def class_x_violations(t: WeightSequence, sigma1: Optional[float] = None,
                       sigma2: Optional[float] = None,
                       barred: bool = False) -> List[HypothesisViolation]:
    """Membership of {t_k} (or of the barred sequence) with the required sigma exponents."""
    out = []
    for name, want, have in (("sigma1", sigma1, t.sigma1), ("sigma2", sigma2, t.sigma2)):
        if want is None:
            continue
        same = (math.isinf(want) and math.isinf(have)) or math.isclose(
            want, have, rel_tol=SIGMA_RTOL
        )
        if not same:
            out.append(HypothesisViolation(f"{name} = {want:g}", f"weights declare {have:g}"))
    report = check_class_X_bar(t) if barred else check_class_X(t)
    if not report.member:
        detail = "; ".join(report.notes) or "fitted constants not finite"
        out.append(HypothesisViolation(f"weights in class {report.label}", detail))
    return out


def conv_violations(t: WeightSequence, params: NormParams, A: float, mu: float,
                    L_phi: Optional[int] = None) -> List[HypothesisViolation]:
    """Hypotheses of the maximal-function bound and of the mollifier-independence results.

    The head condition is only checked when a moment order ``L_phi`` is given.
    """
    q, r, p = params.q, params.r, params.p
    out = _exponent_violations(params, mu, min(1.0, q, r), "min{1, q, r}")
    if not A > 0:
        out.append(HypothesisViolation("A > 0", f"A = {A:g}", A))
    if out:
        return out
    s = q / mu
    out.extend(class_x_violations(t, r * conjugate_exponent(p / r),
                                  p if L_phi is not None else None))
    tail = hardy_violation("(2^{kA} alpha1_k)^mu", beta_sequence(t.alpha1, A, mu), s,
                           Direction.TAIL)
    if tail:
        out.append(tail)
    if L_phi is not None:
        head = hardy_violation("(2^{-k(1+L_phi)} alpha2_k)^mu",
                               beta_sequence(t.alpha2, -(1.0 + L_phi), mu), s, Direction.HEAD)
        if head:
            out.append(head)
    return out


def diff_violations(t: WeightSequence, params: NormParams, mu: float,
                    L_phi: Optional[int] = None) -> List[HypothesisViolation]:
    """Hypotheses equating the convolution norm with the averaged-difference norm."""
    q, r, p, l = params.q, params.r, params.p, params.l
    out = _exponent_violations(params, mu, min(1.0, q, r), "min{1, r, q}")
    if out:
        return out
    s = q / mu
    out.extend(class_x_violations(t, r * conjugate_exponent(p / r), p))
    checks = [
        ("(alpha1_k)^mu", beta_sequence(t.alpha1, 0.0, mu), Direction.TAIL),
        ("(2^{-kl} alpha2_k)^mu", beta_sequence(t.alpha2, -float(l), mu), Direction.HEAD),
    ]
    if L_phi is not None:
        checks.append(("(2^{-k(1+L_phi)} alpha2_k)^mu",
                       beta_sequence(t.alpha2, -(1.0 + L_phi), mu), Direction.HEAD))
    for name, make, direction in checks:
        found = hardy_violation(name, make, s, direction)
        if found:
            out.append(found)
    return out


def spline_violations(t: WeightSequence, params: NormParams, mu: float,
                      theta: Optional[float] = None) -> List[HypothesisViolation]:
    """Hypotheses of the spline decomposition bounds (barred weights in class X)."""
    q, r, p, l = params.q, params.r, params.p, params.l
    theta = min(p, r) if theta is None else theta
    out = []
    if not 0 < theta <= min(p, r):
        out.append(HypothesisViolation("theta in (0, min{p, r}]", f"theta = {theta:g}", theta))
    if not 0 < mu <= min(1.0, theta, q) + 1e-12:
        out.append(HypothesisViolation("mu in (0, min{1, theta, q}]", f"mu = {mu:g}", mu))
    if out:
        return out
    s = q / mu
    dim = t.grid.dim
    shift = dim / theta if math.isinf(r) else dim * (1.0 / theta - 1.0 / r)
    out.extend(class_x_violations(t, theta * conjugate_exponent(p / theta), p, barred=True))
    for name, make, direction in (
        ("(alpha1_k 2^{-kn(1/theta - 1/r)})^mu", beta_sequence(t.alpha1, -shift, mu),
         Direction.TAIL),
        ("(2^{-kl} alpha2_k)^mu", beta_sequence(t.alpha2, -float(l), mu), Direction.HEAD),
    ):
        found = hardy_violation(name, make, s, direction)
        if found:
            out.append(found)
    return out


def embedding_violations(t: WeightSequence, params: NormParams, mu: float,
                         theta: Optional[float] = None) -> List[HypothesisViolation]:
    """Hypotheses of the local L_r embedding of the convolution space."""
    q, r, p = params.q, params.r, params.p
    theta = min(p, r) if theta is None else theta
    out = []
    if r < 1:
        out.append(HypothesisViolation("r >= 1", f"r = {r:g}", r))
    if not 0 < theta <= min(p, r):
        out.append(HypothesisViolation("theta in (0, min{p, r}]", f"theta = {theta:g}", theta))
    if not 0 < mu <= min(1.0, q, theta) + 1e-12:
        out.append(HypothesisViolation("mu in (0, min{1, q, theta}]", f"mu = {mu:g}", mu))
    if out:
        return out
    out.extend(class_x_violations(t, theta * conjugate_exponent(p / theta)))
    dim = t.grid.dim
    gap = dim / theta if math.isinf(r) else dim * (1.0 / theta - 1.0 / r)
    make = beta_sequence(t.alpha1, gap, mu, exponent=-1.0)
    q_conj = conjugate_exponent(q / mu)
    small, large = (lq_norm(make(n), q_conj) for n in (128, 256))
    if not (math.isfinite(large) and large <= small * 1.01):
        out.append(HypothesisViolation(
            "{2^{kn mu (1/theta - 1/r)} (alpha1_k)^{-mu}} in l_{q'_mu}",
            f"l_{q_conj:g} norm grows from {small:.6g} to {large:.6g} when doubling length",
            large,
        ))
    return out


def trace_violations(gamma: GridFunction, p: float, r: float, l: int,
                     codim: int) -> List[HypothesisViolation]:
    """Hypotheses of the weighted Sobolev trace description."""
    out = []
    if not 1 < p < math.inf:
        out.append(HypothesisViolation("p in (1, inf)", f"p = {p:g}", p))
    if not 1 <= r < p:
        out.append(HypothesisViolation("r in [1, p)", f"r = {r:g}", r))
    if not l * r > codim:
        out.append(HypothesisViolation("l > codim / r", f"l = {l}, codim = {codim}, r = {r:g}"))
    if out:
        return out
    constant = check_ap_loc(gamma.with_values(gamma.values ** p), p / r)
    if not constant <= AP_LOC_CAP:
        out.append(HypothesisViolation(f"gamma^p in A^loc_{p / r:g}",
                                       "local Muckenhoupt constant exceeds cap", constant))
    return out
