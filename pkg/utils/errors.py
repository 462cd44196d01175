import json
import logging
import uuid
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

# Настройка логирования
logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    """Коды завершения командной строки."""
    SUCCESS = 0
    FAILURE = 1
    VALIDATION = 2
    UNCONVERGED = 3


class ErrorType(Enum):
    """Типы ошибок для категоризации."""
    VALIDATION_ERROR = "validation_error"
    WINDOW_ERROR = "window_error"
    EIGENSOLVER_ERROR = "eigensolver_error"
    FIT_ERROR = "fit_error"
    NON_HYPERBOLIC = "non_hyperbolic"
    RESOLVENT_ERROR = "resolvent_error"
    TAIL_BUDGET = "tail_budget"
    DEGENERATE_CHANGE = "degenerate_change"
    UNCONVERGED = "unconverged"
    UNKNOWN_ERROR = "unknown_error"


class LocLabError(Exception):
    """Базовое исключение лаборатории."""

    error_type: ErrorType = ErrorType.UNKNOWN_ERROR


class DistributionError(LocLabError, ValueError):
    """Некорректное одноузельное распределение (не нормировано, некомпактный носитель)."""

    error_type = ErrorType.VALIDATION_ERROR


class ConfigValidationError(LocLabError, ValueError):
    """Ошибка валидации конфигурации эксперимента с указанием полей."""

    error_type = ErrorType.VALIDATION_ERROR

    def __init__(self, message: str, fields: Optional[List[str]] = None):
        super().__init__(message)
        self.fields = fields or []


class WindowError(LocLabError, ValueError):
    """Окно потенциала не подходит для операции (несимметрично, слишком коротко)."""

    error_type = ErrorType.WINDOW_ERROR


class EigensolverError(LocLabError, RuntimeError):
    """Собственный решатель не сошелся; хранит дамп диагонали матрицы."""

    error_type = ErrorType.EIGENSOLVER_ERROR

    def __init__(self, message: str, diagonal: Optional[List[float]] = None):
        super().__init__(message)
        self.diagonal = diagonal or []


class DecayFitError(LocLabError, ValueError):
    """Недостаточно данных для экспоненциальной подгонки."""

    error_type = ErrorType.FIT_ERROR


class NonHyperbolicError(LocLabError, ValueError):
    """Произведение коцикла еще не вышло в гиперболический режим."""

    error_type = ErrorType.NON_HYPERBOLIC


class ResolventError(LocLabError, ValueError):
    """Резольвента вызвана на вещественной оси."""

    error_type = ErrorType.RESOLVENT_ERROR


class TailBudgetError(LocLabError, ValueError):
    """Хвост интеграла по константе связи превышает бюджет; нужен больший lambda_max."""

    error_type = ErrorType.TAIL_BUDGET


class DegenerateChangeOfVariables(LocLabError, ValueError):
    """Замена переменных вырождается: компонента собственного вектора в нуле слишком мала."""

    error_type = ErrorType.DEGENERATE_CHANGE


class UnconvergedError(LocLabError, RuntimeError):
    """Численная процедура не сошлась; хранит флаг модуля."""

    error_type = ErrorType.UNCONVERGED

    def __init__(self, message: str, flag: str = "unconverged", residual: Optional[float] = None):
        super().__init__(message)
        self.flag = flag
        self.residual = residual


def categorize_error(error: Exception) -> ErrorType:
    """Категоризирует тип ошибки."""
    if isinstance(error, LocLabError):
        return error.error_type
    if isinstance(error, ValidationError):
        return ErrorType.VALIDATION_ERROR
    return ErrorType.UNKNOWN_ERROR


def exit_code_for(error_type: ErrorType) -> ExitCode:
    """Возвращает код завершения для категории ошибки."""
    if error_type in (ErrorType.VALIDATION_ERROR, ErrorType.WINDOW_ERROR):
        return ExitCode.VALIDATION
    if error_type in (ErrorType.UNCONVERGED, ErrorType.NON_HYPERBOLIC, ErrorType.TAIL_BUDGET):
        return ExitCode.UNCONVERGED
    return ExitCode.FAILURE


def log_error_details(error: Exception, context: Dict[str, Any]) -> ErrorType:
    """Логирует детальную информацию об ошибке.

    Args:
        error: Исключение.
        context: Контекст операции (параметры запуска).

    Returns:
        Категория ошибки.
    """
    error_type = categorize_error(error)

    error_details: Dict[str, Any] = {
        "error_type": error_type.value,
        "error_message": str(error),
        "error_class": error.__class__.__name__,
        "context": context,
        "run_id": str(uuid.uuid4()),
    }

    # Добавляем специфичные детали для разных типов ошибок
    if isinstance(error, EigensolverError):
        error_details["diagonal"] = error.diagonal
    elif isinstance(error, UnconvergedError):
        error_details.update({"flag": error.flag, "residual": error.residual})
    elif isinstance(error, ConfigValidationError):
        error_details["fields"] = error.fields
    elif isinstance(error, ValidationError):
        error_details["fields"] = [".".join(str(p) for p in e["loc"]) for e in error.errors()]

    logger.error(f"Ошибка выполнения: {json.dumps(error_details, ensure_ascii=False, indent=2, default=str)}")
    return error_type
