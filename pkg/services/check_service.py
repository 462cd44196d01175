import logging
import math
import time
from typing import Callable, List, Tuple

import numpy as np

from models.experiment import CheckSection
from models.schemas import CheckResult, GridFunction, RealGrid, SiteDistribution
from services.dynamics_service import default_t_grid, dynamics_service
from services.kunz_souillard_service import KsOperators, kunz_souillard_service
from services.model_service import model_service
from services.rank_one_service import rank_one_service
from services.spectra_service import spectra_service
from services.transfer_service import transfer_service
from utils.errors import LocLabError, log_error_details
from utils.metrics import run_metrics
from utils.parallel import map_realizations
from utils.rng import stream

# Настройка логирования
logger = logging.getLogger(__name__)

# Допуски свойств
DET_TOL = 1e-6
KINGMAN_TOL = 1e-9
EIGEN_TOL = 1e-10
AK_TOL = 1e-10
JACOBIAN_TOL = 1e-4
INVOLUTION_FACTOR = 10.0  # ‖U(Uf) - f‖₂/‖f‖₂ ≤ INVOLUTION_FACTOR·h
MASS_TOL = 1e-6


def shell_profile(grid: RealGrid) -> GridFunction:
    """Гладкая функция с носителем в 0.5 ≤ |x| ≤ 2 (cos² по радиусу)."""
    radius = np.abs(grid.nodes)
    inside = (radius >= 0.5) & (radius <= 2.0)
    values = np.where(inside, np.cos(math.pi * (radius - 1.25) / 1.5) ** 2, 0.0)
    return GridFunction(grid=grid, values=values)


class CheckService:
    """Набор проверок инвариантов; каждая возвращает измеренный дефект, допуск и вердикт."""

    def __init__(self, dist: SiteDistribution, settings: CheckSection, seed: int):
        """Инициализация набора.

        Args:
            dist: Одноузельное распределение.
            settings: Размеры проверок.
            seed: Зерно.
        """
        self.dist = dist
        self.settings = settings
        self.seed = seed

    def determinant_preservation(self) -> CheckResult:
        n = self.settings.product_steps
        path = model_service.sample_path(self.dist, self.seed, 0, (1, n))
        lo, hi = model_service.sigma0(self.dist)
        worst = max(
            transfer_service.determinant_defect(float(E), path, n)
            for E in np.linspace(lo, hi, 7)
        )
        return CheckResult(name="determinant_preservation", passed=worst <= DET_TOL, measured=worst, tolerance=DET_TOL)

    def kingman_subadditivity(self) -> CheckResult:
        worst = -math.inf
        lo, hi = model_service.sigma0(self.dist)
        for sample in range(self.settings.kingman_samples):
            rng = stream(self.seed, 1, sample)
            n, m = (int(v) for v in rng.integers(1, 1001, size=2))
            E = float(rng.uniform(lo, hi))
            path = model_service.sample_path(self.dist, self.seed, sample, (1, n + m))
            worst = max(worst, transfer_service.kingman_defect(E, path, n, m))
        return CheckResult(name="kingman_subadditivity", passed=worst <= KINGMAN_TOL, measured=worst, tolerance=KINGMAN_TOL)

    def herglotz_sign(self) -> CheckResult:
        violations = rank_one_service.herglotz_survey(21, self.settings.herglotz_samples, self.seed)
        return CheckResult(
            name="herglotz_sign", passed=violations == 0, measured=float(violations), tolerance=0.0,
            detail=f"{self.settings.herglotz_samples} случайных (H, φ, z)",
        )

    def aronszajn_krein(self) -> CheckResult:
        H = model_service.hamiltonian(self.dist, self.seed, 0, 10)
        phi = np.zeros(H.size)
        phi[H.site_index(0)] = 1.0
        worst = rank_one_service.aronszajn_krein_grid(
            H, phi, np.linspace(-5.0, 5.0, 10), np.linspace(-3.0, 4.0, 10), np.geomspace(0.1, 5.0, 10)
        )
        return CheckResult(name="aronszajn_krein", passed=worst < AK_TOL, measured=worst, tolerance=AK_TOL)

    def spectrum_containment(self) -> CheckResult:
        lo, hi = model_service.sigma0(self.dist)

        def excess(k: int) -> float:
            worst = 0.0
            for L in range(1, self.settings.L_max + 1):
                values = spectra_service.diagonalize(model_service.hamiltonian(self.dist, self.seed, k, L)).eigenvalues
                worst = max(worst, float(lo - values[0]), float(values[-1] - hi))
            return worst

        worst = max(map_realizations(excess, range(self.settings.containment_realizations)))
        return CheckResult(name="spectrum_containment", passed=worst <= EIGEN_TOL, measured=worst, tolerance=EIGEN_TOL)

    def spectrum_coverage(self) -> CheckResult:
        """Покрытие Σ собственными значениями вне зон хвостов Лифшица у краев компонент."""
        L = self.settings.coverage_L
        spectrum = model_service.almost_sure_spectrum(self.dist)
        eigenvalues = np.concatenate(map_realizations(
            lambda k: spectra_service.diagonalize(model_service.hamiltonian(self.dist, self.seed, k, L)).eigenvalues,
            range(self.settings.coverage_realizations),
        ))
        margin = self.settings.coverage_edge
        gap = model_service.spectrum_coverage_gap(eigenvalues, spectrum, margin)
        edge_gap = model_service.spectrum_coverage_gap(eigenvalues, spectrum)
        tolerance = self.settings.coverage_gap
        return CheckResult(
            name="spectrum_coverage", passed=gap < tolerance, measured=gap, tolerance=tolerance,
            detail=f"зона у краев {margin}; разрыв с учетом краев {edge_gap:.3f}",
        )

    def eigensystem_invariants(self) -> CheckResult:
        """Полнота, ортонормированность и невязка на случайной матрице 41×41."""
        H = model_service.hamiltonian(self.dist, self.seed, 0, 20)
        es = spectra_service.diagonalize(H)
        worst = max(
            spectra_service.completeness_defect(es),
            spectra_service.orthonormality_defect(es),
            spectra_service.residual_defect(H, es),
        )
        return CheckResult(name="eigensystem_invariants", passed=worst <= EIGEN_TOL, measured=worst, tolerance=EIGEN_TOL)

    def interlacing(self) -> CheckResult:
        worst = max(
            spectra_service.interlacing_check(self.dist, self.seed, k, 10)
            for k in range(self.settings.interlacing_realizations)
        )
        return CheckResult(name="interlacing", passed=worst <= EIGEN_TOL, measured=worst, tolerance=EIGEN_TOL)

    def domination(self) -> CheckResult:
        t_grid = default_t_grid()

        def defect(k: int) -> float:
            es = spectra_service.diagonalize(model_service.hamiltonian(self.dist, self.seed, k, 10))
            return max(
                dynamics_service.sup_correlator_sampled(es, m, 0, t_grid) - dynamics_service.rho_contribution(es, m, 0)
                for m in range(-10, 11)
            )

        worst = max(map_realizations(defect, range(20)))
        return CheckResult(name="domination", passed=worst <= EIGEN_TOL, measured=worst, tolerance=EIGEN_TOL)

    def _ks_skipped(self, name: str) -> CheckResult:
        return CheckResult(
            name=name, passed=True, measured=0.0, tolerance=0.0, skipped=True,
            detail="ν атомарно: операторы Кунца-Суйяра требуют плотность",
        )

    def u_involution(self) -> CheckResult:
        grid = RealGrid(half_width=4.0, points=self.settings.ks_grid_n)
        f = shell_profile(grid)
        back = kunz_souillard_service.op_U(kunz_souillard_service.op_U(f))
        measured = f.with_values(back.values - f.values).l2_norm() / f.l2_norm()
        tolerance = INVOLUTION_FACTOR * grid.spacing
        return CheckResult(name="u_involution", passed=measured <= tolerance, measured=measured, tolerance=tolerance)

    def mass_preservation(self) -> CheckResult:
        if self.dist.is_atomic:
            return self._ks_skipped("mass_preservation")
        # образ носителя f лежит в |x| ≤ 4 + 2M
        half_width = max(self.settings.ks_grid_x, 8.0 + 4.0 * self.dist.support_radius)
        grid = RealGrid(half_width=half_width, points=self.settings.ks_grid_n)
        f = shell_profile(grid)
        lo, hi = model_service.sigma0(self.dist)
        worst = 0.0
        for E in np.linspace(lo, hi, 5):
            image = kunz_souillard_service.op_T0(KsOperators(self.dist, float(E), grid), f)
            worst = max(worst, abs(image.l1_norm() - f.l1_norm()) / f.l1_norm())
        return CheckResult(name="mass_preservation", passed=worst <= MASS_TOL, measured=worst, tolerance=MASS_TOL)

    def jacobian_identity(self) -> CheckResult:
        checks = kunz_souillard_service.jacobian_survey([1, 2, 3], self.settings.jacobian_instances, self.seed)
        worst = max(check.relative_defect for check in checks)
        return CheckResult(name="jacobian_identity", passed=worst < JACOBIAN_TOL, measured=worst, tolerance=JACOBIAN_TOL)

    def route_equivalence(self) -> CheckResult:
        """ρ_L(m, 0) через операторы и Монте-Карло; measured = max |op - mc| / (3·(stderr + budget))."""
        if self.dist.is_atomic:
            return self._ks_skipped("route_equivalence")
        L = self.settings.route_L
        profile = kunz_souillard_service.rho_operator_profile(
            self.dist, L, list(range(1, L + 1)), self.settings.route_e_points,
            self.settings.ks_grid_x, self.settings.ks_grid_n,
        )
        comparisons = kunz_souillard_service.route_comparison(
            self.dist, profile, self.settings.route_realizations, self.seed
        )
        worst = max(c.discrepancy / max(3.0 * (c.stderr + c.budget), 1e-300) for c in comparisons)
        return CheckResult(
            name="route_equivalence", passed=all(c.agrees for c in comparisons), measured=worst, tolerance=1.0,
            detail=f"L = {L}, {self.settings.route_realizations} реализаций",
        )

    def checks(self) -> List[Tuple[str, Callable[[], CheckResult]]]:
        return [
            ("determinant_preservation", self.determinant_preservation),
            ("kingman_subadditivity", self.kingman_subadditivity),
            ("herglotz_sign", self.herglotz_sign),
            ("aronszajn_krein", self.aronszajn_krein),
            ("spectrum_containment", self.spectrum_containment),
            ("spectrum_coverage", self.spectrum_coverage),
            ("eigensystem_invariants", self.eigensystem_invariants),
            ("interlacing", self.interlacing),
            ("domination", self.domination),
            ("u_involution", self.u_involution),
            ("mass_preservation", self.mass_preservation),
            ("jacobian_identity", self.jacobian_identity),
            ("route_equivalence", self.route_equivalence),
        ]

    def run_suite(self) -> List[CheckResult]:
        """Запускает все проверки; ошибка одной проверки делает ее проваленной, но не прерывает набор."""
        results = []
        for name, check in self.checks():
            start_time = time.perf_counter()
            try:
                with run_metrics.track(f"check.{name}"):
                    result = check()
            except (LocLabError, ValueError, ArithmeticError) as e:
                log_error_details(e, {"check": name, "seed": self.seed})
                result = CheckResult(name=name, passed=False, measured=math.nan, tolerance=math.nan, detail=str(e))
            elapsed = time.perf_counter() - start_time
            if result.passed:
                logger.info(f"Проверка {name}: пройдена ({result.measured:.3e} ≤ {result.tolerance:.1e}), {elapsed:.3f}s")
            else:
                logger.warning(f"Проверка {name}: ПРОВАЛЕНА ({result.measured:.3e}, допуск {result.tolerance:.1e})")
            results.append(result)
        return results
