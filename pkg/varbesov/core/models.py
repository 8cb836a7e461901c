# varbesov/core/models.py
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple


class Direction(Enum):
    """Which Hardy-type condition a sequence is tested against."""

    TAIL = "tail"
    HEAD = "head"


class Verdict(Enum):
    FINITE = "finite"
    DIVERGENT = "divergent"
    INCONCLUSIVE = "inconclusive"


class NormKind(Enum):
    CONV = "conv"
    DIFF = "diff"
    SPLINE = "spline"
    FOURIER = "fourier"
    AVGDIFF = "avgdiff"


@dataclass(frozen=True)
class NormValue:
    """A truncated quasi-norm together with its per-level terms.

    ``tail_fraction`` is the share of the last level term in the q-sum (for
    q = inf, the last term over the maximum); a large value means the level
    cap K cuts off a significant part of the series.
    """

    value: float
    terms: Tuple[float, ...]
    tail_fraction: float
    zero_order: float = 0.0

    def __float__(self) -> float:
        return self.value

    @classmethod
    def from_terms(cls, terms, q: float, zero_order: float = 0.0) -> "NormValue":
        terms = tuple(float(t) for t in terms)
        if not terms:
            return cls(zero_order, terms, 0.0, zero_order)
        if math.isinf(q):
            total = max(terms)
            tail = terms[-1] / total if total > 0 else 0.0
        else:
            powered = [t ** q for t in terms]
            s = math.fsum(powered)
            total = s ** (1.0 / q)
            tail = powered[-1] / s if s > 0 else 0.0
        return cls(total + zero_order, terms, tail, zero_order)


@dataclass
class ClassReport:
    """Fitted constants of a weight-class check.

    ``witness`` maps a condition name to the worst (k, j, m) it was seen at.
    ``stable`` is None when no refinement comparison was possible.
    """

    member: bool
    C1: float
    C2: float
    C_alpha3: float
    witness: Dict[str, Tuple[int, int, Tuple[int, ...]]] = field(default_factory=dict)
    stable: Optional[bool] = None
    label: str = "X"
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class RatioSummary:
    """Spread of norm ratios N_a(f) / N_b(f) over a set of functions.

    Pairs where both norms vanish are skipped; ``constant`` is the smallest C
    with every ratio in [1/C, C].
    """

    ratios: Tuple[float, ...]
    skipped: int = 0

    @classmethod
    def from_pairs(cls, pairs) -> "RatioSummary":
        ratios, skipped = [], 0
        for num, den in pairs:
            if num == 0 and den == 0:
                skipped += 1
            elif den == 0:
                ratios.append(math.inf)
            else:
                ratios.append(num / den)
        return cls(tuple(ratios), skipped)

    @property
    def low(self) -> float:
        return min(self.ratios) if self.ratios else math.nan

    @property
    def high(self) -> float:
        return max(self.ratios) if self.ratios else math.nan

    @property
    def constant(self) -> float:
        if not self.ratios:
            return math.nan
        if self.low <= 0:
            return math.inf
        return max(self.high, 1.0 / self.low)
