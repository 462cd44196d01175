import logging
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

from utils.errors import ErrorType, categorize_error

# Настройка логирования
logger = logging.getLogger(__name__)


class OperationStats:
    """Накопленная статистика одной операции."""

    def __init__(self):
        self.calls = 0
        self.successes = 0
        self.failures = 0
        self.total_time = 0.0
        self.error_counts = {error_type.value: 0 for error_type in ErrorType}

    @property
    def average_time(self) -> float:
        return self.total_time / max(self.calls, 1)


class RunMetrics:
    """Класс для сбора метрик численных операций за один запуск."""

    def __init__(self):
        self.operations: Dict[str, OperationStats] = {}

    def record(
        self, operation: str, success: bool, elapsed: float, error_type: Optional[ErrorType] = None
    ) -> None:
        """Записывает метрики вызова."""
        stats = self.operations.setdefault(operation, OperationStats())
        stats.calls += 1
        stats.total_time += elapsed
        if success:
            stats.successes += 1
        else:
            stats.failures += 1
            if error_type:
                stats.error_counts[error_type.value] += 1

    @contextmanager
    def track(self, operation: str) -> Iterator[None]:
        """Замеряет время операции и учитывает исход."""
        start_time = time.perf_counter()
        try:
            yield
        except Exception as e:
            self.record(operation, False, time.perf_counter() - start_time, categorize_error(e))
            raise
        self.record(operation, True, time.perf_counter() - start_time)

    def get_stats(self) -> Dict[str, Any]:
        """Возвращает статистику."""
        return {
            name: {
                "calls": stats.calls,
                "successes": stats.successes,
                "failures": stats.failures,
                "total_time": round(stats.total_time, 3),
                "average_time": round(stats.average_time, 3),
                "error_counts": {k: v for k, v in stats.error_counts.items() if v},
            }
            for name, stats in sorted(self.operations.items())
        }

    def log_summary(self) -> None:
        """Логирует сводку метрик."""
        for name, stats in self.get_stats().items():
            logger.info(
                f"{name}: вызовов {stats['calls']}, ошибок {stats['failures']}, "
                f"время {stats['total_time']}s (среднее {stats['average_time']}s)"
            )


# Метрики текущего процесса
run_metrics = RunMetrics()
