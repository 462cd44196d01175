import pytest

from config import config
from models.schemas import SiteDistribution


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Логи во временный каталог и последовательный проход по реализациям."""
    monkeypatch.setattr(config, "LOG_FILE", tmp_path / "logs" / "loclab.log")
    monkeypatch.setattr(config, "WORKERS", 1)
    return config


@pytest.fixture
def uniform_dist() -> SiteDistribution:
    return SiteDistribution.uniform(0.0, 1.0)


@pytest.fixture
def bernoulli_dist() -> SiteDistribution:
    return SiteDistribution.bernoulli(0.0, 1.0, 0.5)


@pytest.fixture
def free_dist() -> SiteDistribution:
    """Атом в нуле: свободный лапласиан."""
    return SiteDistribution.atomic([(0.0, 1.0)])


@pytest.fixture
def wide_uniform_dist() -> SiteDistribution:
    """Сильный беспорядок: быстрая сходимость и короткие длины локализации."""
    return SiteDistribution.uniform(-3.0, 3.0)
