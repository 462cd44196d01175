import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, TypeVar

from config import config

logger = logging.getLogger(__name__)

T = TypeVar('T')


def map_realizations(
    func: Callable[[int], T], indices: Iterable[int], workers: Optional[int] = None
) -> List[T]:
    """Применяет func к номерам реализаций, сохраняя порядок результатов.

    Args:
        func: Функция от номера реализации.
        indices: Номера реализаций.
        workers: Число потоков; None означает значение из настроек.

    Returns:
        Результаты в порядке индексов.
    """
    items = list(indices)
    workers = config.get_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [func(i) for i in items]

    logger.debug(f"Параллельный проход: {len(items)} реализаций, потоков {workers}")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
