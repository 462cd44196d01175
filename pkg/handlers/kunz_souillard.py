import argparse
import logging
import math

from constants.commands import CSV_COLUMNS, Command
from constants.texts import (
    HELP_E_POINTS, HELP_GRID_N, HELP_GRID_X, HELP_KS, HELP_L, HELP_M_MAX, HELP_MC_REALIZATIONS
)
from models.experiment import ExperimentConfig
from services.kunz_souillard_service import kunz_souillard_service
from utils.errors import ExitCode, UnconvergedError
from utils.storage import ArtifactStorage

# Настройка логирования
logger = logging.getLogger(__name__)


def register_kunz_souillard_handlers(subparsers: argparse._SubParsersAction) -> None:
    """Регистрирует подкоманду ks.

    Args:
        subparsers: Группа подкоманд главного парсера.
    """
    ks = subparsers.add_parser(Command.KS.value, help=HELP_KS)
    ks.add_argument("--L", dest="L", type=int, help=HELP_L)
    ks.add_argument("--m-max", dest="m_max", type=int, help=HELP_M_MAX)
    ks.add_argument("--grid-N", dest="grid_n", type=int, help=HELP_GRID_N)
    ks.add_argument("--grid-X", dest="grid_x", type=float, help=HELP_GRID_X)
    ks.add_argument("--e-points", dest="e_points", type=int, help=HELP_E_POINTS)
    ks.add_argument("--mc-realizations", dest="mc_realizations", type=int, help=HELP_MC_REALIZATIONS)

    def run_ks(args: argparse.Namespace, experiment: ExperimentConfig) -> ExitCode:
        """Сертификат норм, ρ_L(m, 0) через операторы против Монте-Карло и проверка якобиана.

        Несошедшийся сертификат норм записывается в отчет и завершает запуск с кодом 3,
        расхождение двух путей вычисления ρ_L завершает запуск с кодом 1.
        """
        section = experiment.ks
        dist = experiment.distribution.build()
        storage = ArtifactStorage.for_experiment(experiment)
        payload = {}

        report = None
        if section.certify:
            report = kunz_souillard_service.norm_certify(
                dist, section.e_points, section.grid_x, section.grid_n, section.assembly_n
            )
            payload["norms"] = report.model_dump()

        m_values = list(range(1, section.m_max + 1))
        profile = kunz_souillard_service.rho_operator_profile(
            dist, section.L, m_values, section.e_points, section.grid_x, section.grid_n,
            section.refine_x, section.refine_n,
        )
        comparisons = []
        if section.mc_realizations > 0:
            comparisons = kunz_souillard_service.route_comparison(
                dist, profile, section.mc_realizations, experiment.seed
            )
            rows = [
                (c.m, c.rho_operator, c.rho_mc, c.stderr, c.budget, int(c.agrees)) for c in comparisons
            ]
            payload["routes_agree"] = all(c.agrees for c in comparisons)
        else:
            rows = [(r.m, r.value, math.nan, math.nan, r.budget, -1) for r in profile]
        storage.write_csv(Command.KS, rows, CSV_COLUMNS[Command.KS])

        if report is not None:
            payload["decay_bound"] = [
                {**bound.model_dump(), "holds": bound.holds}
                for bound in kunz_souillard_service.decay_bounds(dist, report, profile)
            ]

        if section.jacobian_instances > 0:
            checks = kunz_souillard_service.jacobian_survey(
                section.jacobian_L, section.jacobian_instances, experiment.seed
            )
            payload["jacobian"] = {
                "max_relative_defect": max(c.relative_defect for c in checks),
                "max_ratio_defect": max(c.ratio_defect for c in checks),
                "instances": len(checks),
            }
        storage.write_json(Command.KS, payload, name="report")

        if report is not None and not report.converged:
            raise UnconvergedError(
                f"бюджет {report.budget:.2e} превышает 10% запаса δ = {report.delta:.4f}",
                flag="norm_certify", residual=report.budget,
            )
        if comparisons and not payload["routes_agree"]:
            logger.error("ρ_L через операторы и Монте-Карло не согласуются в пределах 3·(stderr + бюджет)")
            return ExitCode.FAILURE
        return ExitCode.SUCCESS

    ks.set_defaults(
        handler=run_ks, command=Command.KS, section="ks",
        overrides=("L", "m_max", "grid_n", "grid_x", "e_points", "mc_realizations"),
    )
