import argparse
import logging
import sys
import time
from typing import List, Optional

from config import config
from constants.texts import (
    HELP_CONFIG, HELP_DUMP_CONFIG, HELP_OUTPUT, HELP_SEED, HELP_WORKERS, MESSAGE_CONFIG_DUMPED,
    MESSAGE_DONE, MESSAGE_FAILED, MESSAGE_NO_COMMAND, PROG_DESCRIPTION, PROG_EPILOG
)
from handlers.checks import register_check_handlers
from handlers.cocycle import register_cocycle_handlers
from handlers.kunz_souillard import register_kunz_souillard_handlers
from handlers.localization import register_localization_handlers
from models.experiment import ExperimentConfig
from utils.errors import ExitCode, exit_code_for, log_error_details
from utils.metrics import run_metrics
from utils.storage import ConfigStorage

logger = logging.getLogger(__name__)


def setup_logging() -> None:
    """Настройка логирования: stdout и файл из настроек."""
    config.LOG_FILE.parent.mkdir(parents=True, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, config.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        handlers=[
            logging.StreamHandler(sys.stdout),
            logging.FileHandler(config.LOG_FILE, encoding="utf-8"),
        ],
        force=True,
    )


def build_parser() -> argparse.ArgumentParser:
    """Главный парсер с подкомандами по модулям."""
    parser = argparse.ArgumentParser(prog="loclab", description=PROG_DESCRIPTION, epilog=PROG_EPILOG)
    parser.add_argument("--config", help=HELP_CONFIG)
    parser.add_argument("--dump-config", dest="dump_config", help=HELP_DUMP_CONFIG)
    parser.add_argument("--seed", type=int, help=HELP_SEED)
    parser.add_argument("--workers", type=int, help=HELP_WORKERS)
    parser.add_argument("--output", help=HELP_OUTPUT)

    subparsers = parser.add_subparsers(dest="subcommand")
    register_cocycle_handlers(subparsers)
    register_localization_handlers(subparsers)
    register_kunz_souillard_handlers(subparsers)
    register_check_handlers(subparsers)
    return parser


def load_experiment(args: argparse.Namespace) -> ExperimentConfig:
    """Конфигурация из файла (или по умолчанию) с глобальными флагами поверх."""
    experiment = ConfigStorage(args.config).load() if args.config else ExperimentConfig()
    experiment = experiment.with_overrides("", seed=args.seed, workers=args.workers)
    return experiment.with_overrides("output", directory=args.output)


def apply_subcommand_overrides(args: argparse.Namespace, experiment: ExperimentConfig) -> ExperimentConfig:
    """Флаги подкоманды поверх ее секции; без подкоманды конфигурация не меняется."""
    section = getattr(args, "section", None)
    if section is None:
        return experiment
    return experiment.with_overrides(section, **{name: getattr(args, name) for name in args.overrides})


def main(argv: Optional[List[str]] = None) -> int:
    """Основная функция запуска.

    Args:
        argv: Аргументы командной строки (по умолчанию sys.argv).

    Returns:
        Код завершения.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging()

    start_time = time.perf_counter()
    code = ExitCode.SUCCESS
    try:
        experiment = apply_subcommand_overrides(args, load_experiment(args))
        if experiment.workers is not None:
            config.WORKERS = experiment.workers

        if args.dump_config:
            path = ConfigStorage(args.dump_config).save(experiment)
            print(MESSAGE_CONFIG_DUMPED.format(path=path))
            return int(ExitCode.SUCCESS)

        if getattr(args, "handler", None) is None:
            print(MESSAGE_NO_COMMAND, file=sys.stderr)
            parser.print_help(sys.stderr)
            return int(ExitCode.VALIDATION)

        logger.info(f"Запуск {args.subcommand}: seed = {experiment.seed}, хэш {experiment.config_hash()[:12]}")
        code = args.handler(args, experiment)
    except Exception as e:
        context = {"subcommand": args.subcommand, "config": args.config}
        error_type = log_error_details(e, context)
        print(MESSAGE_FAILED.format(error_type=error_type.value, message=e), file=sys.stderr)
        code = exit_code_for(error_type)
    finally:
        run_metrics.log_summary()

    logger.info(MESSAGE_DONE.format(
        command=args.subcommand, elapsed=time.perf_counter() - start_time, code=int(code)
    ))
    return int(code)


if __name__ == "__main__":
    sys.exit(main())
