import logging
import time
from typing import List, Tuple

import numpy as np
from scipy import linalg, stats

from config import config
from constants.defaults import (
    CENSUS_GAMMA_THRESHOLD, CENSUS_QUANTILES, CENSUS_R2_THRESHOLD, MIN_FIT_SITES
)
from models.schemas import (
    CensusRow, CensusSummary, DecayFit, EigenSystem, FiniteHamiltonian, SelfAdjointOperator,
    SiteDistribution
)
from services.model_service import model_service
from utils.errors import DecayFitError, EigensolverError
from utils.metrics import run_metrics
from utils.parallel import map_realizations

# Настройка логирования
logger = logging.getLogger(__name__)


class SpectraService:
    """Сервис конечномерной диагонализации и анализа убывания собственных векторов."""

    def __init__(self):
        """Инициализация сервиса."""
        self.fit_floor = config.FIT_FLOOR

    def diagonalize(self, H: SelfAdjointOperator) -> EigenSystem:
        """Полная собственная система H^{(L)}.

        Args:
            H: Трехдиагональный гамильтониан или плотный самосопряженный оператор.

        Returns:
            Собственные значения по возрастанию и ортонормированные векторы-столбцы.

        Raises:
            EigensolverError: Если решатель не сошелся (с дампом диагонали).
        """
        with run_metrics.track("diagonalize"):
            try:
                if isinstance(H, FiniteHamiltonian):
                    if H.size == 1:
                        values, vectors = H.diagonal.copy(), np.ones((1, 1))
                    else:
                        values, vectors = linalg.eigh_tridiagonal(H.diagonal, H.off_diagonal)
                else:
                    values, vectors = linalg.eigh(H.to_dense())
            except (linalg.LinAlgError, ValueError) as e:
                diagonal = np.diag(H.to_dense()).tolist()
                raise EigensolverError(f"собственный решатель не сошелся: {e}", diagonal) from e
        return EigenSystem(L=H.L, eigenvalues=values, eigenvectors=vectors)

    def decay_profile(self, psi: np.ndarray) -> DecayFit:
        """Подгонка |ψ(n)| ≈ C e^{-γ|n - n_k|} на окне [-L, L].

        Центр n_k — наименьший узел среди максимумов |ψ|. Используются узлы
        с |ψ(n)| выше порога FIT_FLOOR.

        Args:
            psi: Нормированный вектор длины 2L + 1.

        Returns:
            Параметры подгонки и ее r².
        """
        magnitude = np.abs(np.asarray(psi, dtype=float))
        offset = (len(magnitude) - 1) // 2
        peak = int(np.argmax(magnitude))
        usable = magnitude > self.fit_floor
        if int(usable.sum()) < MIN_FIT_SITES:
            raise DecayFitError(
                f"для подгонки нужно не меньше {MIN_FIT_SITES} узлов, доступно {int(usable.sum())}"
            )
        distance = np.abs(np.arange(len(magnitude)) - peak)[usable]
        fit = stats.linregress(distance, np.log(magnitude[usable]))
        return DecayFit(
            center=peak - offset,
            rate=float(-fit.slope),
            prefactor=float(np.exp(fit.intercept)),
            r_squared=float(fit.rvalue ** 2),
            rate_stderr=float(fit.stderr),
            sites_used=int(usable.sum()),
        )

    @staticmethod
    def inverse_participation_ratio(es: EigenSystem) -> np.ndarray:
        """Σ_m φ_k(m)⁴ для каждого собственного вектора."""
        return np.sum(es.eigenvectors ** 4, axis=0)

    def _census_rows(self, dist: SiteDistribution, L: int, seed: int, realization: int) -> List[CensusRow]:
        es = self.diagonalize(model_service.hamiltonian(dist, seed, realization, L))
        ipr = self.inverse_participation_ratio(es)
        rows = []
        for k in range(es.size):
            fit = self.decay_profile(es.eigenvectors[:, k])
            rows.append(CensusRow(
                realization=realization, k=k, energy=float(es.eigenvalues[k]), rate=fit.rate,
                center=fit.center, r_squared=fit.r_squared, ipr=float(ipr[k]),
            ))
        return rows

    def localization_census(
        self, dist: SiteDistribution, L: int, realizations: int, seed: int
    ) -> Tuple[List[CensusRow], CensusSummary]:
        """Перепись экспоненциальной локализации по всем векторам всех реализаций.

        Пороги r² > 0.9 и γ_k > 0.02 фиксированы заранее; доля прошедших
        сообщается, а не предполагается.
        """
        if L < 20:
            logger.warning(f"Перепись на малом окне L = {L}")
        start_time = time.perf_counter()
        per_realization = map_realizations(
            lambda k: self._census_rows(dist, L, seed, k), range(realizations)
        )
        rows = [row for block in per_realization for row in block]
        rates = np.array([row.rate for row in rows])
        passed = sum(
            1 for row in rows
            if row.r_squared > CENSUS_R2_THRESHOLD and row.rate > CENSUS_GAMMA_THRESHOLD
        )
        summary = CensusSummary(
            L=L,
            realizations=realizations,
            eigenvectors=len(rows),
            rate_quantiles=[(q, float(np.quantile(rates, q))) for q in CENSUS_QUANTILES],
            fraction_localized=passed / len(rows),
            r2_threshold=CENSUS_R2_THRESHOLD,
            rate_threshold=CENSUS_GAMMA_THRESHOLD,
        )
        logger.info(
            f"Перепись L = {L}, R = {realizations}: доля локализованных "
            f"{summary.fraction_localized:.3f} за {time.perf_counter() - start_time:.3f}s"
        )
        return rows, summary

    def interlacing_check(self, dist: SiteDistribution, seed: int, realization: int, L: int) -> float:
        """Нарушение чередования собственных значений при росте L -> L + 1 (0 — выполнено)."""
        small = self.diagonalize(model_service.hamiltonian(dist, seed, realization, L)).eigenvalues
        big = self.diagonalize(model_service.hamiltonian(dist, seed, realization, L + 1)).eigenvalues
        # Удаление двух крайних узлов: λ_k(L+1) ≤ μ_k(L) ≤ λ_{k+2}(L+1)
        violation = np.maximum(big[:-2] - small, small - big[2:])
        return float(max(violation.max(), 0.0))

    @staticmethod
    def simplicity_gap(es: EigenSystem) -> float:
        """Наименьшее расстояние между соседними собственными значениями."""
        if es.size == 1:
            return float("inf")
        return float(np.min(np.diff(es.eigenvalues)))

    @staticmethod
    def completeness_defect(es: EigenSystem) -> float:
        """max_m |Σ_k φ_k(m)² - 1|."""
        return float(np.max(np.abs(np.sum(es.eigenvectors ** 2, axis=1) - 1.0)))

    @staticmethod
    def orthonormality_defect(es: EigenSystem) -> float:
        gram = es.eigenvectors.T @ es.eigenvectors
        return float(np.max(np.abs(gram - np.eye(es.size))))

    @staticmethod
    def residual_defect(H: SelfAdjointOperator, es: EigenSystem) -> float:
        """max_k ‖Hφ_k - E_k φ_k‖ / (2 + M + |E_k|), M = max |диагональ|."""
        matrix = H.to_dense()
        radius = float(np.max(np.abs(np.diag(matrix))))
        residual = matrix @ es.eigenvectors - es.eigenvectors * es.eigenvalues
        norms = np.linalg.norm(residual, axis=0)
        return float(np.max(norms / (2.0 + radius + np.abs(es.eigenvalues))))


# Создаем экземпляр сервиса
spectra_service = SpectraService()
