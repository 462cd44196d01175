import argparse
import logging

from constants.commands import Command
from constants.texts import HELP_CHECK
from models.experiment import ExperimentConfig
from services.check_service import CheckService
from utils.errors import ExitCode
from utils.storage import ArtifactStorage

# Настройка логирования
logger = logging.getLogger(__name__)


def register_check_handlers(subparsers: argparse._SubParsersAction) -> None:
    """Регистрирует подкоманду check.

    Args:
        subparsers: Группа подкоманд главного парсера.
    """
    check = subparsers.add_parser(Command.CHECK.value, help=HELP_CHECK)

    def run_check(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """Полный набор проверок; любая проваленная проверка дает код 1."""
        suite = CheckService(experiment.distribution.build(), experiment.check, experiment.seed)
        results = suite.run_suite()
        passed = all(result.passed for result in results)
        ArtifactStorage.for_experiment(experiment).write_json(Command.CHECK, {
            "passed": passed,
            "results": [result.model_dump() for result in results],
        })
        failed = [result.name for result in results if not result.passed]
        if failed:
            logger.error(f"Проваленные проверки: {', '.join(failed)}")
            return ExitCode.FAILURE
        return ExitCode.SUCCESS

    check.set_defaults(handler=run_check, command=Command.CHECK)
