import logging
from typing import Tuple

import numpy as np

from models.schemas import (
    FiniteHamiltonian, IntervalUnion, PotentialPath, SiteDistribution, merge_intervals
)
from utils.errors import WindowError
from utils.metrics import run_metrics
from utils.rng import site_uniforms

# Настройка логирования
logger = logging.getLogger(__name__)


class ModelService:
    """Сервис модели Андерсона: распределение ν, траектории потенциала, гамильтонианы H^{(L)}."""

    def sample_path(
        self, dist: SiteDistribution, seed: int, realization: int, window: Tuple[int, int]
    ) -> PotentialPath:
        """Выбирает значения ω_n для узлов окна.

        Значение узла зависит только от (seed, realization, n), поэтому расширение
        окна сохраняет уже выбранные значения.

        Args:
            dist: Одноузельное распределение.
            seed: Зерно эксперимента.
            realization: Номер реализации.
            window: Окно (n_lo, n_hi) включительно.

        Returns:
            Траектория потенциала на окне.
        """
        n_lo, n_hi = window
        if n_hi < n_lo:
            raise WindowError(f"пустое окно [{n_lo}, {n_hi}]")
        values = dist.quantile(site_uniforms(seed, realization, n_lo, n_hi))
        return PotentialPath(
            n_lo=n_lo, n_hi=n_hi, values=np.asarray(values, dtype=float),
            seed=seed, realization_index=realization,
        )

    def sample_symmetric(
        self, dist: SiteDistribution, seed: int, realization: int, L: int
    ) -> PotentialPath:
        """Траектория на симметричном окне [-L, L]."""
        return self.sample_path(dist, seed, realization, (-L, L))

    def build_hamiltonian(self, path: PotentialPath) -> FiniteHamiltonian:
        """Строит H_ω^{(L)} с граничными условиями Дирихле u(-L-1) = u(L+1) = 0.

        Args:
            path: Траектория на окне [-L, L].

        Returns:
            Трехдиагональный гамильтониан.
        """
        if path.n_lo != -path.n_hi:
            raise WindowError(f"окно [{path.n_lo}, {path.n_hi}] не симметрично относительно 0")
        return FiniteHamiltonian(L=path.n_hi, diagonal=path.values.copy())

    def hamiltonian(
        self, dist: SiteDistribution, seed: int, realization: int, L: int
    ) -> FiniteHamiltonian:
        return self.build_hamiltonian(self.sample_symmetric(dist, seed, realization, L))

    def almost_sure_spectrum(self, dist: SiteDistribution) -> IntervalUnion:
        """Σ = [-2, 2] + supp ν как минимальное объединение отрезков."""
        pieces = [(lo - 2.0, hi + 2.0) for lo, hi in dist.support_intervals]
        return IntervalUnion(intervals=merge_intervals(pieces))

    def sigma0(self, dist: SiteDistribution) -> Tuple[float, float]:
        """Окно Σ0 = [-2-M, 2+M], содержащее все конечномерные спектры."""
        radius = dist.support_radius
        return -2.0 - radius, 2.0 + radius

    def birkhoff_average(self, dist: SiteDistribution, seed: int, n: int) -> float:
        """Эргодическое среднее (1/n) Σ_{m<n} f(T^m ω) для f(ω) = ω_0."""
        if n < 1:
            raise WindowError("число шагов должно быть не меньше 1")
        with run_metrics.track("birkhoff_average"):
            path = self.sample_path(dist, seed, 0, (0, n - 1))
            # f(T^m ω) = (T^m ω)_0 = ω_m
            average = float(np.mean(path.values))
        logger.debug(f"Среднее Биркгофа по {n} шагам: {average}")
        return average

    def spectrum_coverage_gap(
        self, eigenvalues: np.ndarray, spectrum: IntervalUnion, edge_margin: float = 0.0
    ) -> float:
        """Наибольший отрезок Σ, не содержащий ни одного собственного значения.

        Args:
            eigenvalues: Собственные значения по всем реализациям.
            spectrum: Почти наверное спектр.
            edge_margin: Ширина исключаемой зоны у концов каждой компоненты.

        Returns:
            Длина наибольшей непокрытой части компоненты Σ.
        """
        eigenvalues = np.sort(np.asarray(eigenvalues, dtype=float).ravel())
        worst = 0.0
        for lo, hi in spectrum.intervals:
            lo, hi = lo + edge_margin, hi - edge_margin
            if hi <= lo:
                continue
            inside = eigenvalues[(eigenvalues >= lo) & (eigenvalues <= hi)]
            points = np.concatenate([[lo], inside, [hi]])
            worst = max(worst, float(np.max(np.diff(points))))
        return worst


# Создаем экземпляр сервиса
model_service = ModelService()
