import csv
import io
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Generic, Iterable, Sequence, Type, TypeVar, Union

import numpy as np
import yaml
from pydantic import BaseModel

from constants.commands import CSV_MAGIC, FORMAT_VERSION, Command
from models.experiment import ExperimentConfig
from utils.errors import ConfigValidationError

# Настройка логирования
logger = logging.getLogger(__name__)

# Тип для дженерика
T = TypeVar('T', bound=BaseModel)


def _format_cell(value: Any) -> str:
    """Точное текстовое представление ячейки (repr для float, чтобы повторы совпадали побайтно)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _json_serializer(obj: Any) -> Any:
    """Сериализатор для объектов, которые не могут быть сериализованы в JSON.

    Args:
        obj: Объект для сериализации.

    Returns:
        Сериализованный объект.
    """
    if isinstance(obj, BaseModel):
        return obj.model_dump(mode="json")
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Объект типа {type(obj)} не может быть сериализован в JSON")


def _atomic_write(path: Path, text: str) -> Path:
    """Пишет текст во временный файл и атомарно заменяет им целевой."""
    os.makedirs(path.parent, exist_ok=True)
    temp_file = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(temp_file, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temp_file, path)
    except OSError as e:
        logger.error(f"Ошибка при записи {path}: {e}")
        if temp_file.exists():
            temp_file.unlink()
        raise
    return path


class ArtifactStorage:
    """Хранилище выходных файлов одного запуска: CSV и JSON с хэшем конфигурации."""

    def __init__(self, directory: Union[str, Path], config_hash: str):
        """Инициализация хранилища.

        Args:
            directory: Каталог вывода.
            config_hash: SHA-256 конфигурации запуска.
        """
        self.directory = Path(directory)
        self.config_hash = config_hash

    @classmethod
    def for_experiment(cls, experiment: ExperimentConfig) -> "ArtifactStorage":
        return cls(experiment.output.directory, experiment.config_hash())

    def path_for(self, command: Command, suffix: str, name: str = "") -> Path:
        stem = command.section if not name else f"{command.section}_{name}"
        return self.directory / f"{stem}.{suffix}"

    def write_csv(
        self, command: Command, rows: Iterable[Sequence[Any]], columns: Sequence[str], name: str = ""
    ) -> Path:
        """Записать таблицу с заголовочными комментариями.

        Args:
            command: Подкоманда.
            rows: Строки значений в порядке столбцов.
            columns: Имена столбцов.
            name: Суффикс имени файла.

        Returns:
            Путь к записанному файлу.
        """
        buffer = io.StringIO()
        buffer.write(f"# {CSV_MAGIC}\n")
        buffer.write(f"# command: {command.value}\n")
        buffer.write(f"# config_hash: {self.config_hash}\n")
        buffer.write(f"# columns: {','.join(columns)}\n")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        count = 0
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"строка из {len(row)} значений для {len(columns)} столбцов")
            writer.writerow([_format_cell(value) for value in row])
            count += 1
        path = _atomic_write(self.path_for(command, "csv", name), buffer.getvalue())
        logger.info(f"Записано {count} строк в {path}")
        return path

    def write_json(self, command: Command, payload: Dict[str, Any], name: str = "") -> Path:
        """Записать отчет JSON (ключи отсортированы, без отметок времени)."""
        document = dict(payload)
        document.update({
            "command": command.value,
            "config_hash": self.config_hash,
            "format_version": FORMAT_VERSION,
        })
        text = json.dumps(document, ensure_ascii=False, indent=2, sort_keys=True, default=_json_serializer)
        path = _atomic_write(self.path_for(command, "json", name), text + "\n")
        logger.info(f"Записан отчет {path}")
        return path


def read_csv_header(path: Union[str, Path]) -> Dict[str, str]:
    """Читает комментарии-заголовки CSV в словарь (magic, command, config_hash, columns)."""
    header = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.startswith("# "):
                break
            body = line[2:].rstrip("\n")
            if ": " in body:
                key, value = body.split(": ", 1)
                header[key] = value
            else:
                header["magic"] = body
    return header


class ConfigStorage(Generic[T]):
    """YAML-файл конфигурации с проверкой через pydantic."""

    def __init__(self, file_path: Union[str, Path], model_class: Type[T] = ExperimentConfig):
        """Инициализация хранилища.

        Args:
            file_path: Путь к YAML-файлу.
            model_class: Класс модели конфигурации.
        """
        self.file_path = Path(file_path)
        self.model_class = model_class

    def load(self) -> T:
        """Прочитать и проверить конфигурацию; пустой файл дает значения по умолчанию.

        Raises:
            ValidationError: Если значения вне допустимых диапазонов или есть лишние ключи.
        """
        with open(self.file_path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f) or {}
        if not isinstance(data, dict):
            raise ConfigValidationError(f"{self.file_path}: ожидается словарь секций")
        return self.model_class.model_validate(data)

    def save(self, config: T) -> Path:
        """Сохранить конфигурацию в YAML (порядок секций как в модели)."""
        text = yaml.safe_dump(config.model_dump(mode="json"), allow_unicode=True, sort_keys=False)
        path = _atomic_write(self.file_path, text)
        logger.info(f"Конфигурация сохранена в {path}")
        return path
