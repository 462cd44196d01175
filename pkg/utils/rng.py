"""Счетчиковые генераторы случайных чисел.

Равномерные величины узла n реализации k берутся из потока Philox, ключ которого
зависит только от (seed, k, номер блока узлов). Поэтому расширение окна не меняет
уже выбранные значения, а реализации независимы и не зависят от порядка вычислений.
"""

from functools import lru_cache

import numpy as np

from constants.defaults import RNG_BLOCK_SIZE


def _zigzag(index: int) -> int:
    """Отображает целое в неотрицательное (SeedSequence не принимает отрицательные)."""
    return 2 * index if index >= 0 else -2 * index - 1


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Независимый поток, адресуемый ключами."""
    entropy = [int(seed)] + [_zigzag(int(k)) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@lru_cache(maxsize=512)
def _block(seed: int, realization: int, block: int) -> np.ndarray:
    values = stream(seed, realization, block).random(RNG_BLOCK_SIZE)
    values.setflags(write=False)
    return values


def site_uniforms(seed: int, realization: int, n_lo: int, n_hi: int) -> np.ndarray:
    """Равномерные на [0, 1) величины для узлов n_lo..n_hi включительно.

    Args:
        seed: Зерно эксперимента.
        realization: Номер реализации.
        n_lo: Левый узел окна.
        n_hi: Правый узел окна.

    Returns:
        Массив длины n_hi - n_lo + 1.
    """
    first = n_lo // RNG_BLOCK_SIZE
    last = n_hi // RNG_BLOCK_SIZE
    chunks = [_block(int(seed), int(realization), b) for b in range(first, last + 1)]
    joined = np.concatenate(chunks) if len(chunks) > 1 else chunks[0]
    offset = n_lo - first * RNG_BLOCK_SIZE
    return np.array(joined[offset:offset + (n_hi - n_lo + 1)])
