import os
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Конфигурация процесса, загружаемая из переменных окружения."""

    # Параллелизм: одна ручка на весь запуск
    WORKERS: int = Field(default=0, ge=0)  # 0 = по числу ядер

    # Вывод
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Path = Path("logs/loclab.log")

    # Численные константы, общие для модулей
    RENORM_INTERVAL: int = Field(default=16, ge=1, le=64)  # шагов между перенормировками
    HYPERBOLIC_THRESHOLD: float = Field(default=10.0, gt=1.0)  # порог ‖T_n‖ для направления Оселедеца
    FIT_FLOOR: float = Field(default=1e-14, gt=0.0)  # нижний порог |ψ| при подгонке

    model_config = SettingsConfigDict(
        env_prefix="LOCLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore"
    )

    def get_workers(self) -> int:
        """Получить фактическое число потоков."""
        if self.WORKERS > 0:
            return self.WORKERS
        return os.cpu_count() or 1


# Создаем экземпляр настроек
config = Settings()
