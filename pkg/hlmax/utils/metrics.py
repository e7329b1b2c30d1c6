"""
Run Metrics
Timing and counting for evaluations and verification checks
"""
import statistics
import threading
import time
from collections import deque
from typing import Dict, List, Optional

from hlmax.utils.logger import setup_logger

logger = setup_logger(__name__)


class TimingCollector:
    """
    Collects durations per named stage and integer counters

    Keeps rolling windows so long suites do not grow memory. Safe to share
    between worker threads.
    """

    def __init__(self, window_size: int = 256):
        """
        Initialize collector

        Args:
            window_size: Number of samples kept per stage
        """
        self.window_size = window_size
        self.durations: Dict[str, deque] = {}
        self.counters: Dict[str, int] = {}
        self.start_time = time.perf_counter()
        self._lock = threading.Lock()

    def record(self, stage: str, elapsed_ms: float):
        """
        Record a duration

        Args:
            stage: Stage name (e.g. "check:convergence/real-line")
            elapsed_ms: Duration in milliseconds
        """
        with self._lock:
            if stage not in self.durations:
                self.durations[stage] = deque(maxlen=self.window_size)
            self.durations[stage].append(elapsed_ms)

    def increment(self, counter: str, amount: int = 1):
        """
        Increment a counter

        Args:
            counter: Counter name
            amount: Amount to add
        """
        with self._lock:
            self.counters[counter] = self.counters.get(counter, 0) + amount

    def get_stats(self, stage: str) -> Optional[Dict[str, float]]:
        """
        Summary statistics of one stage

        Args:
            stage: Stage name

        Returns:
            Dictionary with statistics or None when nothing was recorded
        """
        with self._lock:
            values = list(self.durations.get(stage, ()))

        if not values:
            return None

        return {
            'mean': statistics.mean(values),
            'median': statistics.median(values),
            'min': min(values),
            'max': max(values),
            'total': sum(values),
            'count': len(values),
        }

    def get_summary(self) -> Dict:
        """Summary of all stages and counters"""
        with self._lock:
            stages = list(self.durations)
            counters = dict(self.counters)

        summary = {
            'elapsed_seconds': time.perf_counter() - self.start_time,
            'stages': {},
            'counters': counters,
        }
        for stage in stages:
            stats = self.get_stats(stage)
            if stats:
                summary['stages'][stage] = stats

        return summary

    def slowest(self, n: int = 5) -> List[str]:
        """Names of the n stages with the largest total time"""
        summary = self.get_summary()['stages']
        ranked = sorted(summary, key=lambda s: summary[s]['total'], reverse=True)
        return ranked[:n]

    def log_summary(self):
        """Log summary of metrics"""
        summary = self.get_summary()

        logger.info(f"Run finished in {summary['elapsed_seconds']:.1f}s")
        for name, value in sorted(summary['counters'].items()):
            logger.info(f"  {name}: {value}")
        for name in self.slowest():
            stats = summary['stages'][name]
            logger.info(f"  {name}: total={stats['total']:.0f}ms, count={stats['count']}")


class StageTimer:
    """
    Context manager timing one stage into a TimingCollector
    """

    def __init__(self, collector: TimingCollector, stage: str):
        """
        Args:
            collector: Destination collector
            stage: Stage name to record under
        """
        self.collector = collector
        self.stage = stage
        self.start_time: Optional[float] = None
        self.elapsed_ms = 0.0

    def __enter__(self):
        self.start_time = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.start_time is not None:
            self.elapsed_ms = (time.perf_counter() - self.start_time) * 1000
            self.collector.record(self.stage, self.elapsed_ms)
