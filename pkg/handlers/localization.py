import argparse
import logging
from typing import Optional, Tuple

import numpy as np

from constants.commands import CSV_COLUMNS, Command
from constants.texts import (
    HELP_DYNLOCAL, HELP_L, HELP_LAMBDA_MAX, HELP_M_MAX, HELP_REALIZATIONS, HELP_SIZE,
    HELP_SPECTRAL_AVG, HELP_SPECTRUM, HELP_Z
)
from models.experiment import ExperimentConfig
from services.dynamics_service import dynamics_service
from services.model_service import model_service
from services.rank_one_service import rank_one_service
from services.spectra_service import spectra_service
from utils.errors import DecayFitError, ExitCode
from utils.storage import ArtifactStorage

# Настройка логирования
logger = logging.getLogger(__name__)


def parse_complex(value: str) -> Tuple[float, float]:
    """Разбирает точку z из строки 're,im'."""
    parts = value.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"ожидается re,im, получено {value!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e


def register_localization_handlers(subparsers: argparse._SubParsersAction) -> None:
    """Регистрирует подкоманды spectrum, dynlocal и spectral-avg.

    Args:
        subparsers: Группа подкоманд главного парсера.
    """
    spectrum = subparsers.add_parser(Command.SPECTRUM.value, help=HELP_SPECTRUM)
    spectrum.add_argument("--L", dest="L", type=int, help=HELP_L)
    spectrum.add_argument("--realizations", type=int, help=HELP_REALIZATIONS)

    def run_spectrum(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """Перепись подгонок по всем собственным векторам и сводка квантилей."""
        section = experiment.spectrum
        rows, summary = spectra_service.localization_census(
            experiment.distribution.build(), section.L, section.realizations, experiment.seed
        )
        storage = ArtifactStorage.for_experiment(experiment)
        storage.write_csv(
            Command.SPECTRUM,
            [(r.realization, r.k, r.energy, r.rate, r.center, r.r_squared) for r in rows],
            CSV_COLUMNS[Command.SPECTRUM],
        )
        payload = summary.model_dump()
        payload["mean_ipr"] = float(np.mean([r.ipr for r in rows]))
        storage.write_json(Command.SPECTRUM, payload, name="summary")
        return ExitCode.SUCCESS

    spectrum.set_defaults(
        handler=run_spectrum, command=Command.SPECTRUM, section="spectrum", overrides=("L", "realizations")
    )

    dynlocal = subparsers.add_parser(Command.DYNLOCAL.value, help=HELP_DYNLOCAL)
    dynlocal.add_argument("--L", dest="L", type=int, help=HELP_L)
    dynlocal.add_argument("--m-max", dest="m_max", type=int, help=HELP_M_MAX)
    dynlocal.add_argument("--realizations", type=int, help=HELP_REALIZATIONS)

    def run_dynlocal(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """Профиль ρ_L(m, 0) и выборочного sup с подгонкой скорости убывания."""
        section = experiment.dynlocal
        rows = dynamics_service.correlator_profile(
            experiment.distribution.build(), section.L, section.m_max, section.realizations, experiment.seed
        )
        storage = ArtifactStorage.for_experiment(experiment)
        storage.write_csv(
            Command.DYNLOCAL,
            [(r.m, r.rho_mean, r.rho_stderr, r.sup_sampled_mean) for r in rows],
            CSV_COLUMNS[Command.DYNLOCAL],
        )
        fit: Optional[dict] = None
        try:
            fit = dynamics_service.decay_rate_fit([r.rho_mean for r in rows]).model_dump()
        except DecayFitError as e:
            logger.warning(f"Подгонка убывания пропущена: {e}")
        storage.write_json(Command.DYNLOCAL, {
            "profile": [r.model_dump() for r in rows],
            "decay_fit": fit,
            "max_domination_defect": max(r.max_domination_defect for r in rows),
        }, name="fit")
        return ExitCode.SUCCESS

    dynlocal.set_defaults(
        handler=run_dynlocal, command=Command.DYNLOCAL,
        section="dynlocal", overrides=("L", "m_max", "realizations"),
    )

    spectral_avg = subparsers.add_parser(Command.SPECTRAL_AVG.value, help=HELP_SPECTRAL_AVG)
    spectral_avg.add_argument("--size", type=int, help=HELP_SIZE)
    spectral_avg.add_argument("--z", type=parse_complex, help=HELP_Z)
    spectral_avg.add_argument("--lambda-max", dest="lambda_max", type=float, help=HELP_LAMBDA_MAX)

    def run_spectral_avg(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """Спектральное усреднение на случайном экземпляре и дефект формулы Ароншайна-Крейна."""
        section = experiment.spectral_avg
        L = (section.size - 1) // 2
        H = model_service.hamiltonian(experiment.distribution.build(), experiment.seed, 0, L)
        phi = np.zeros(H.size)
        phi[H.site_index(section.site)] = 1.0
        z = complex(*section.z)

        result = rank_one_service.spectral_average_check(H, phi, z, section.lambda_max, section.quad_points)
        ak_defect = max(
            rank_one_service.aronszajn_krein_check(H, phi, lam, z) for lam in (-1.0, 0.3, 5.0)
        )
        ArtifactStorage.for_experiment(experiment).write_json(Command.SPECTRAL_AVG, {
            "z": {"re": z.real, "im": z.imag},
            "integral_re": result.integral.real,
            "integral_im": result.integral.imag,
            "target": {"re": result.target.real, "im": result.target.imag},
            "defect": result.defect,
            "tail": {"re": result.tail.real, "im": result.tail.imag},
            "quadrature_error": result.quadrature_error,
            "aronszajn_krein_defect": ak_defect,
        })
        return ExitCode.SUCCESS

    spectral_avg.set_defaults(
        handler=run_spectral_avg, command=Command.SPECTRAL_AVG,
        section="spectral_avg", overrides=("size", "z", "lambda_max"),
    )
