import logging
import math
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from constants.defaults import T_GRID_MAX, T_GRID_MIN, T_GRID_POINTS
from models.schemas import (
    CorrelatorEstimate, CorrelatorKind, CorrelatorProfileRow, DecayRateFit, EigenSystem,
    SiteDistribution
)
from services.model_service import model_service
from services.spectra_service import spectra_service
from utils.errors import DecayFitError
from utils.metrics import run_metrics
from utils.parallel import map_realizations

# Настройка логирования
logger = logging.getLogger(__name__)


def default_t_grid() -> np.ndarray:
    """0 и T_GRID_POINTS точек, равномерных по логарифму на [0.1, 10³]."""
    return np.concatenate([[0.0], np.logspace(math.log10(T_GRID_MIN), math.log10(T_GRID_MAX), T_GRID_POINTS)])


def _mean_stderr(values: np.ndarray) -> tuple:
    count = len(values)
    stderr = float(np.std(values, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return float(np.mean(values)), stderr


class DynamicsService:
    """Сервис динамики e^{-itH^{(L)}} и корреляторов a_L(m, n), ρ_L(m, n)."""

    def evolve(self, es: EigenSystem, psi0: np.ndarray, t: float) -> np.ndarray:
        """Σ_k e^{-itE_k}⟨φ_k, ψ0⟩φ_k."""
        psi0 = np.asarray(psi0, dtype=complex)
        if t == 0:
            return psi0.copy()
        coefficients = es.eigenvectors.T @ psi0
        return es.eigenvectors @ (np.exp(-1j * t * es.eigenvalues) * coefficients)

    def amplitudes(self, es: EigenSystem, m: int, n: int, t_grid: Sequence[float]) -> np.ndarray:
        """⟨δ_m, e^{-itH}δ_n⟩ для всех t сетки."""
        weights = es.site_row(m) * es.site_row(n)
        phases = np.exp(-1j * np.outer(np.asarray(t_grid, dtype=float), es.eigenvalues))
        return phases @ weights

    def rho_contribution(self, es: EigenSystem, m: int, n: int) -> float:
        """Σ_k |φ_k(m)|·|φ_k(n)|; при m = n равно 1 по полноте."""
        row_m, row_n = es.site_row(m), es.site_row(n)
        if m == n:
            return 1.0
        return float(np.sum(np.abs(row_m) * np.abs(row_n)))

    def sup_correlator_sampled(
        self, es: EigenSystem, m: int, n: int, t_grid: Optional[Sequence[float]] = None
    ) -> float:
        """max_t |⟨δ_m, e^{-itH}δ_n⟩| по сетке; нижняя граница для sup по всем t."""
        t_grid = default_t_grid() if t_grid is None else t_grid
        if len(t_grid) == 0:
            raise ValueError("сетка времен пуста")
        return float(np.max(np.abs(self.amplitudes(es, m, n, t_grid))))

    def time_averaged_projection(
        self, es: EigenSystem, E: float, T: float, m: int, n: int
    ) -> complex:
        """(1/T)∫₀ᵀ e^{isE}⟨δ_m, e^{-isH}δ_n⟩ ds в замкнутой форме.

        При T -> ∞ стремится к матричному элементу проектора на собственное
        пространство E (или к 0, если E не собственное значение).
        """
        detuning = E - es.eigenvalues
        phase = 1j * T * detuning
        safe = np.where(detuning == 0.0, 1.0, phase)
        kernel = np.where(detuning == 0.0, 1.0, (np.exp(safe) - 1.0) / safe)
        return complex(np.sum(kernel * es.site_row(m) * es.site_row(n)))

    def rho_L_monte_carlo(
        self, dist: SiteDistribution, L: int, m: int, n: int, realizations: int, seed: int
    ) -> CorrelatorEstimate:
        """Выборочное среднее ρ_L(m, n) по реализациям со стандартной ошибкой."""
        if abs(m) > L or abs(n) > L:
            raise ValueError(f"узлы ({m}, {n}) вне окна [-{L}, {L}]")
        if m == n:
            return CorrelatorEstimate(
                m=m, n=n, value=1.0, kind=CorrelatorKind.RHO_BOUND, realizations=realizations, stderr=0.0
            )
        with run_metrics.track("rho_L_monte_carlo"):
            values = np.array(map_realizations(
                lambda k: self.rho_contribution(
                    spectra_service.diagonalize(model_service.hamiltonian(dist, seed, k, L)), m, n
                ),
                range(realizations),
            ))
        mean, stderr = _mean_stderr(values)
        logger.debug(f"ρ_{L}({m}, {n}) = {mean:.6g} ± {stderr:.2g} по {realizations} реализациям")
        return CorrelatorEstimate(
            m=m, n=n, value=mean, kind=CorrelatorKind.RHO_BOUND, realizations=realizations, stderr=stderr
        )

    def correlator_profile(
        self,
        dist: SiteDistribution,
        L: int,
        m_max: int,
        realizations: int,
        seed: int,
        t_grid: Optional[Sequence[float]] = None,
    ) -> List[CorrelatorProfileRow]:
        """Профили ρ_L(m, 0) и выборочного sup при m = 0..m_max за один проход по реализациям.

        Args:
            dist: Одноузельное распределение.
            L: Полуширина окна.
            m_max: Наибольшее m (не больше L).
            realizations: Число реализаций.
            seed: Зерно.
            t_grid: Сетка времен (по умолчанию default_t_grid()).

        Returns:
            Строки профиля по возрастанию m с дефектом доминирования sup ≤ ρ.
        """
        if m_max > L:
            raise ValueError(f"m_max = {m_max} больше L = {L}")
        t_grid = default_t_grid() if t_grid is None else t_grid

        def one(k: int) -> np.ndarray:
            es = spectra_service.diagonalize(model_service.hamiltonian(dist, seed, k, L))
            return np.array([
                [self.rho_contribution(es, m, 0), self.sup_correlator_sampled(es, m, 0, t_grid)]
                for m in range(m_max + 1)
            ])

        with run_metrics.track("correlator_profile"):
            samples = np.stack(map_realizations(one, range(realizations)))
        rows = []
        for m in range(m_max + 1):
            rho_mean, rho_stderr = _mean_stderr(samples[:, m, 0])
            sup_mean, sup_stderr = _mean_stderr(samples[:, m, 1])
            rows.append(CorrelatorProfileRow(
                m=m, rho_mean=rho_mean, rho_stderr=rho_stderr,
                sup_sampled_mean=sup_mean, sup_sampled_stderr=sup_stderr,
                max_domination_defect=float(np.max(samples[:, m, 1] - samples[:, m, 0])),
            ))
        return rows

    def sup_correlator_trend(
        self,
        dist: SiteDistribution,
        L_values: Sequence[int],
        m: int,
        realizations: int,
        seed: int,
        t_grid: Optional[Sequence[float]] = None,
    ) -> List[CorrelatorEstimate]:
        """Оценки снизу a_L(m, 0) для нескольких L."""
        estimates = []
        for L in L_values:
            values = np.array(map_realizations(
                lambda k: self.sup_correlator_sampled(
                    spectra_service.diagonalize(model_service.hamiltonian(dist, seed, k, L)), m, 0, t_grid
                ),
                range(realizations),
            ))
            mean, stderr = _mean_stderr(values)
            estimates.append(CorrelatorEstimate(
                m=m, n=0, value=mean, kind=CorrelatorKind.SUP_SAMPLED, realizations=realizations, stderr=stderr
            ))
        return estimates

    def decay_rate_fit(self, values: Sequence[float], m_values: Optional[Sequence[int]] = None) -> DecayRateFit:
        """Наименьшие квадраты log(value) = log C - γ m.

        Args:
            values: Положительные значения при m = 0..m_max (или при m_values).
            m_values: Значения m; по умолчанию 0..len(values) - 1.

        Returns:
            Префактор, скорость, ее ошибка и признак локализации (γ > 3σ).
        """
        values = np.asarray(values, dtype=float)
        m_values = np.arange(len(values)) if m_values is None else np.asarray(m_values, dtype=float)
        if len(values) < 5:
            raise DecayFitError("для подгонки нужно m_max ≥ 4")
        if np.any(values <= 0):
            raise DecayFitError("значения коррелятора должны быть положительными")
        fit = stats.linregress(m_values, np.log(values))
        rate = float(-fit.slope)
        stderr = float(fit.stderr)
        localized = rate > max(3.0 * stderr, 1e-12)
        if not localized:
            logger.warning(f"Убывание не обнаружено: γ = {rate:.3g} ± {stderr:.2g}")
        return DecayRateFit(
            prefactor=float(np.exp(fit.intercept)), rate=rate, rate_stderr=stderr,
            r_squared=float(fit.rvalue ** 2), localized=localized,
        )


# Создаем экземпляр сервиса
dynamics_service = DynamicsService()
