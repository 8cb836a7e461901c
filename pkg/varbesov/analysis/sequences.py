# varbesov/analysis/sequences.py
"""Sequence-space tools: l_q norms, conjugate exponents and discrete Hardy conditions.

Sequences are held by the natural logarithms of their (positive) terms so that
geometric weights such as 2^{kA} can be pushed to hundreds of levels without
overflow; every sum is a ``logsumexp``.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from ..core.error_handling import ExponentError
from ..core.models import Direction, Verdict

logger = logging.getLogger(__name__)

FINITE_GROWTH = 0.01
DIVERGENT_GROWTH = 0.10
STABILITY_LENGTHS = (128, 256)


def conjugate_exponent(s: float) -> float:
    """Hölder conjugate s' with 1/s + 1/s' = 1 (1 <-> inf)."""
    if not s >= 1:
        raise ExponentError(f"conjugate exponent needs s >= 1, got {s}")
    if s == 1:
        return math.inf
    if math.isinf(s):
        return 1.0
    return s / (s - 1.0)


@dataclass(frozen=True)
class ExponentPack:
    p: float
    q: float
    r: float
    theta: float
    mu: float

    def __post_init__(self):
        for name in ("p", "q", "r", "theta", "mu"):
            if not getattr(self, name) > 0:
                raise ExponentError(f"{name} must be positive")

    @property
    def q_mu(self) -> float:
        return self.q / self.mu

    @property
    def q_mu_conj(self) -> float:
        return conjugate_exponent(self.q_mu)

    @property
    def p_r(self) -> float:
        return self.p / self.r

    @property
    def p_r_conj(self) -> float:
        return conjugate_exponent(self.p_r)


@dataclass(frozen=True, eq=False)
class PositiveSequence:
    """Positive terms a_0 .. a_{N-1}, stored as natural logs.

    ``tail_ratio`` in (0, 1) continues the sequence geometrically after the
    last stored term, a_{N-1+i} = a_{N-1} * tail_ratio**i.
    """

    log_terms: np.ndarray
    tail_ratio: Optional[float] = None

    def __post_init__(self):
        logs = np.array(self.log_terms, dtype=float)
        if logs.ndim != 1 or logs.size == 0:
            raise ExponentError("a sequence needs at least one term")
        if np.any(np.isnan(logs)) or np.any(np.isinf(logs)):
            raise ExponentError("sequence terms must be positive and finite")
        if self.tail_ratio is not None and not 0 < self.tail_ratio < 1:
            raise ExponentError(f"tail ratio must lie in (0, 1), got {self.tail_ratio}")
        logs.setflags(write=False)
        object.__setattr__(self, "log_terms", logs)

    @classmethod
    def from_terms(cls, terms: Sequence[float],
                   tail_ratio: Optional[float] = None) -> "PositiveSequence":
        arr = np.asarray(terms, dtype=float)
        if np.any(arr <= 0):
            raise ExponentError("sequence terms must be positive")
        return cls(np.log(arr), tail_ratio)

    @classmethod
    def geometric(cls, start: float, ratio: float, length: int,
                  analytic_tail: bool = False) -> "PositiveSequence":
        logs = math.log(start) + np.arange(length) * math.log(ratio)
        tail = ratio if analytic_tail and ratio < 1 else None
        return cls(logs, tail)

    @property
    def terms(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_terms)

    def __len__(self) -> int:
        return self.log_terms.size

    def power(self, mu: float) -> "PositiveSequence":
        tail = None if self.tail_ratio is None else self.tail_ratio ** mu
        if tail is not None and not tail < 1:
            tail = None
        return PositiveSequence(self.log_terms * mu, tail)


def extend_geometric(values: Sequence[float], length: int) -> PositiveSequence:
    """Continue a finite positive sequence by the ratio of its last two terms."""
    logs = np.log(np.asarray(values, dtype=float))
    if logs.size >= length:
        return PositiveSequence(logs[:length])
    step = logs[-1] - logs[-2] if logs.size > 1 else 0.0
    extra = logs[-1] + step * np.arange(1, length - logs.size + 1)
    return PositiveSequence(np.concatenate([logs, extra]))


def _log_geometric_tail(log_last: float, log_ratio: float) -> float:
    """log of sum_{i>=1} exp(log_last + i log_ratio), log_ratio < 0."""
    return log_last + log_ratio - math.log(-math.expm1(log_ratio))


def lq_norm(a: PositiveSequence, q: float) -> float:
    """(sum a_k^q)^{1/q}, including the analytic tail when one is declared."""
    if math.isinf(q):
        return float(np.exp(a.log_terms.max()))
    total = logsumexp(q * a.log_terms)
    if a.tail_ratio is not None:
        total = np.logaddexp(
            total, _log_geometric_tail(q * a.log_terms[-1], q * math.log(a.tail_ratio))
        )
    return float(np.exp(total / q))


def _log_power_sums(logs: np.ndarray, s: float, reverse: bool) -> np.ndarray:
    """Running log (sum x^s)^{1/s} from the start (or the end); s = inf is a running max."""
    seq = logs[::-1] if reverse else logs
    if math.isinf(s):
        acc = np.maximum.accumulate(seq)
    else:
        acc = np.logaddexp.accumulate(s * seq) / s
    return acc[::-1] if reverse else acc


def hardy_condition(beta: PositiveSequence, s: float, direction: Direction,
                    n_max: int) -> float:
    """sup over n <= n_max of the Hardy-condition product for ``beta``.

    TAIL: (sum_{k<=n} beta^s)^{1/s} (sum_{k>=n} beta^{-s'})^{1/s'}
    HEAD: (sum_{k>=n} beta^s)^{1/s} (sum_{k<=n} beta^{-s'})^{1/s'}
    Sums beyond the stored terms use the analytic tail if present.
    """
    direction = Direction(direction)
    s_conj = conjugate_exponent(s)
    logs = beta.log_terms
    if n_max >= logs.size:
        logger.debug("n_max %d clipped to sequence length %d", n_max, logs.size)
        n_max = logs.size - 1
    log_tail = None if beta.tail_ratio is None else math.log(beta.tail_ratio)

    if direction is Direction.TAIL:
        front = _log_power_sums(logs, s, reverse=False)
        back = _log_power_sums(-logs, s_conj, reverse=True)
        if log_tail is not None:
            # beta decays geometrically, so beta^{-s'} blows up beyond the last term
            return math.inf
    else:
        back = _log_power_sums(logs, s, reverse=True)
        front = _log_power_sums(-logs, s_conj, reverse=False)
        if log_tail is not None and not math.isinf(s):
            extra = _log_geometric_tail(s * logs[-1], s * log_tail)
            back = np.logaddexp(s * back, extra) / s
    product = front[: n_max + 1] + back[: n_max + 1]
    return float(np.exp(product.max()))


def hardy_stability(make_beta: Callable[[int], PositiveSequence], s: float,
                    direction: Direction,
                    lengths: Tuple[int, int] = STABILITY_LENGTHS) -> Tuple[Verdict, float, float]:
    """Classify a Hardy condition as finite or divergent by doubling n_max.

    The sequence for each n_max is built with twice that many terms so tail
    sums reach past n_max.
    """
    values = [hardy_condition(make_beta(2 * n), s, direction, n) for n in lengths]
    small, large = values
    if not math.isfinite(small) or not math.isfinite(large):
        verdict = Verdict.DIVERGENT
    else:
        growth = large / small - 1.0
        if growth <= FINITE_GROWTH:
            verdict = Verdict.FINITE
        elif growth > DIVERGENT_GROWTH:
            verdict = Verdict.DIVERGENT
        else:
            verdict = Verdict.INCONCLUSIVE
    logger.debug("hardy %s s=%s: %.6g -> %.6g (%s)", direction.value, s, small, large,
                 verdict.value)
    return verdict, small, large


def hardy_verify(a: PositiveSequence, beta: PositiveSequence, s: float,
                 direction: Direction) -> float:
    """Ratio (sum beta^s b^s)^{1/s} / (sum beta^s a^s)^{1/s}, b the tail or head sums of a."""
    direction = Direction(direction)
    n = min(len(a), len(beta))
    la = a.log_terms[:n]
    lb = beta.log_terms[:n]
    if direction is Direction.TAIL:
        log_b = _log_power_sums(la, 1.0, reverse=True)
        if a.tail_ratio is not None and n == len(a):
            extra = _log_geometric_tail(la[-1], math.log(a.tail_ratio))
            log_b = np.logaddexp(log_b, extra)
    else:
        log_b = _log_power_sums(la, 1.0, reverse=False)
    if math.isinf(s):
        return float(np.exp((lb + log_b).max() - (lb + la).max()))
    lhs = logsumexp(s * (lb + log_b)) / s
    rhs = logsumexp(s * (lb + la)) / s
    return float(np.exp(lhs - rhs))
