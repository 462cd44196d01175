import argparse
import logging

from constants.commands import CSV_COLUMNS, Command
from constants.texts import (
    HELP_ENERGY, HELP_ENERGY_GRID, HELP_FURSTENBERG, HELP_GRID, HELP_LYAPUNOV, HELP_MATRICES,
    HELP_MAX_ITER, HELP_REALIZATIONS, HELP_STEPS, HELP_TOL
)
from models.experiment import ExperimentConfig
from services.furstenberg_service import furstenberg_service
from services.transfer_service import transfer_service
from utils.errors import ExitCode, UnconvergedError
from utils.storage import ArtifactStorage

# Настройка логирования
logger = logging.getLogger(__name__)


def register_cocycle_handlers(subparsers: argparse._SubParsersAction) -> None:
    """Регистрирует подкоманды lyapunov и furstenberg.

    Args:
        subparsers: Группа подкоманд главного парсера.
    """
    lyapunov = subparsers.add_parser(Command.LYAPUNOV.value, help=HELP_LYAPUNOV)
    lyapunov.add_argument("--energy-grid", dest="energy_grid", help=HELP_ENERGY_GRID)
    lyapunov.add_argument("--steps", type=int, help=HELP_STEPS)
    lyapunov.add_argument("--realizations", type=int, help=HELP_REALIZATIONS)

    def run_lyapunov(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """γ(E) на сетке энергий, строка CSV на каждую энергию."""
        section = experiment.lyapunov
        estimates = transfer_service.lyapunov_scan(
            experiment.distribution.build(), section.energies(), section.steps,
            section.realizations, experiment.seed,
        )
        ArtifactStorage.for_experiment(experiment).write_csv(
            Command.LYAPUNOV,
            [(e.energy, e.gamma_hat, e.stderr, e.steps, e.realizations) for e in estimates],
            CSV_COLUMNS[Command.LYAPUNOV],
        )
        return ExitCode.SUCCESS

    lyapunov.set_defaults(
        handler=run_lyapunov, command=Command.LYAPUNOV,
        section="lyapunov", overrides=("energy_grid", "steps", "realizations"),
    )

    furstenberg = subparsers.add_parser(Command.FURSTENBERG.value, help=HELP_FURSTENBERG)
    furstenberg.add_argument("--grid", type=int, help=HELP_GRID)
    furstenberg.add_argument("--tol", type=float, help=HELP_TOL)
    furstenberg.add_argument("--max-iter", dest="max_iter", type=int, help=HELP_MAX_ITER)
    furstenberg.add_argument(
        "--matrices", choices=["anderson", "rotation", "diagonal_pair", "diagonal_flip"], help=HELP_MATRICES
    )
    furstenberg.add_argument("--energy", type=float, help=HELP_ENERGY)

    def run_furstenberg(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """Инвариантная мера, γ по формуле Фюрстенберга и прямая оценка для сравнения."""
        section = experiment.furstenberg
        if section.matrices == "anderson":
            md = furstenberg_service.anderson_distribution(experiment.distribution.build(), section.energy)
        elif section.matrices == "rotation":
            md = furstenberg_service.rotation_distribution(section.alpha)
        elif section.matrices == "diagonal_pair":
            md = furstenberg_service.diagonal_pair_distribution()
        else:
            md = furstenberg_service.diagonal_flip_distribution()

        measure = furstenberg_service.invariant_measure(md, section.grid, section.tol, section.max_iter)
        gamma = furstenberg_service.furstenberg_gamma(md, measure)
        concentration = furstenberg_service.concentration_diagnostic(
            md, measure, section.concentration_steps, section.trials, experiment.seed
        )
        payload = {
            "matrices": section.matrices,
            "energy": section.energy if section.matrices == "anderson" else None,
            "gamma": gamma,
            "residual": measure.residual,
            "max_bin_weight": measure.max_bin_weight(),
            "iterations": measure.iterations,
            "converged": measure.converged,
            "concentration": concentration,
        }
        ArtifactStorage.for_experiment(experiment).write_json(Command.FURSTENBERG, payload)
        if not measure.converged:
            raise UnconvergedError(
                f"инвариантная мера не сошлась за {measure.iterations} итераций",
                flag="invariant_measure", residual=measure.residual,
            )
        return ExitCode.SUCCESS

    furstenberg.set_defaults(
        handler=run_furstenberg, command=Command.FURSTENBERG,
        section="furstenberg", overrides=("grid", "tol", "max_iter", "matrices", "energy"),
    )
