# varbesov/experiments/monitoring.py
import logging
import statistics
import threading
import time
from collections import deque
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from typing import Deque, Dict, Iterator, List, Optional

logger = logging.getLogger(__name__)


@dataclass
class EvaluationRecord:
    function_id: str
    norm: str
    level: int
    seconds: float
    value: Optional[float] = None
    success: bool = True


class RunMonitor:
    """Wall-time bookkeeping for norm evaluations within one experiment run.

    Records are kept in arrival order (bounded by ``max_history``);
    ``summary`` aggregates them per norm with p50/p95 timings. Safe to
    share between the worker threads of :func:`varbesov.utils.parallel_map`.
    """

    def __init__(self, max_history: int = 10000):
        self.max_history = max_history
        self.records: Deque[EvaluationRecord] = deque(maxlen=max_history)
        self.failures = 0
        self.lock = threading.Lock()

    @contextmanager
    def timed(self, function_id: str, norm: str, level: int) -> Iterator[EvaluationRecord]:
        record = EvaluationRecord(function_id, norm, level, 0.0)
        start = time.perf_counter()
        try:
            yield record
        except Exception:
            record.success = False
            raise
        finally:
            record.seconds = time.perf_counter() - start
            self.add(record)

    def add(self, record: EvaluationRecord) -> None:
        with self.lock:
            self.records.append(record)
            if not record.success:
                self.failures += 1

    def _percentile(self, data: List[float], percentile: int) -> float:
        """Linear-interpolated percentile; a single sample is its own percentile."""
        if len(data) == 1:
            return data[0]
        cuts = statistics.quantiles(data, n=100, method="inclusive")
        return cuts[percentile - 1]

    def summary(self) -> Dict[str, Dict[str, float]]:
        with self.lock:
            records, failures = list(self.records), self.failures
        by_norm: Dict[str, List[float]] = {}
        for record in records:
            by_norm.setdefault(record.norm, []).append(record.seconds)
        out = {}
        for norm in sorted(by_norm):
            times = by_norm[norm]
            out[norm] = {
                "count": len(times),
                "total_seconds": sum(times),
                "p50_seconds": self._percentile(times, 50),
                "p95_seconds": self._percentile(times, 95),
            }
        if failures:
            logger.warning("%d evaluations failed during the run", failures)
        return out

    def export(self) -> List[Dict]:
        with self.lock:
            return [asdict(r) for r in self.records]
