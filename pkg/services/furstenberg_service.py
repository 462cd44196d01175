import logging
import math
import time
from typing import List, Sequence, Tuple

import numpy as np
from scipy import sparse

from constants.defaults import (
    FURSTENBERG_GRID, FURSTENBERG_MAX_ITER, FURSTENBERG_MIN_GRID, FURSTENBERG_TOL,
    QUADRATURE_NODES
)
from models.schemas import (
    InvariantMeasure, MatrixDistribution, ProjectiveMeasure, ProjectivePoint, RefinementStudy,
    SiteDistribution, Sl2, WitnessReport
)
from services.transfer_service import transfer_service
from utils.metrics import run_metrics
from utils.rng import stream

# Настройка логирования
logger = logging.getLogger(__name__)


def _deposit(angles: np.ndarray, grid_size: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Линейная интерполяция точек P¹ на центры бинов с периодическим переходом через π.

    Returns:
        Индексы левого и правого бина и доля массы, уходящая в правый.
    """
    position = np.mod(angles, math.pi) * grid_size / math.pi - 0.5
    lower = np.floor(position)
    frac = position - lower
    left = np.mod(lower.astype(np.int64), grid_size)
    return left, np.mod(left + 1, grid_size), frac


def _projective_angles(matrices: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Углы M·(cos θ, sin θ) для всех матриц и точек, форма (K, G)."""
    u = np.stack([np.cos(theta), np.sin(theta)])
    images = np.einsum("kij,jg->kig", matrices, u)
    return np.arctan2(images[:, 1, :], images[:, 0, :])


class FurstenbergService:
    """Сервис проективной динамики на P¹: инвариантные меры и формула Фюрстенберга."""

    def project_action(self, M: Sl2, p: ProjectivePoint) -> ProjectivePoint:
        """Действие M на P¹: угол M·(cos θ, sin θ) по модулю π."""
        image = M.as_array() @ p.vector()
        return ProjectivePoint.from_angle(math.atan2(image[1], image[0]))

    def dirac_measure(self, grid_size: int, theta: float) -> ProjectiveMeasure:
        """Точечная масса в θ, разнесенная по двум ближайшим центрам."""
        left, right, frac = _deposit(np.array([theta]), grid_size)
        weights = np.zeros(grid_size)
        weights[left[0]] += 1.0 - frac[0]
        weights[right[0]] += frac[0]
        return ProjectiveMeasure(grid_size=grid_size, weights=weights)

    def transfer_operator(self, md: MatrixDistribution, grid_size: int) -> sparse.csr_matrix:
        """Марковский оператор m -> ν * m на сетке бинов (столбцы суммируются в 1)."""
        theta = (np.arange(grid_size) + 0.5) * math.pi / grid_size
        angles = _projective_angles(md.matrices, theta)
        left, right, frac = _deposit(angles, grid_size)
        weight = md.weights[:, None]
        source = np.broadcast_to(np.arange(grid_size), angles.shape)
        rows = np.concatenate([left.ravel(), right.ravel()])
        cols = np.concatenate([source.ravel(), source.ravel()])
        data = np.concatenate([(weight * (1.0 - frac)).ravel(), (weight * frac).ravel()])
        return sparse.csr_matrix((data, (rows, cols)), shape=(grid_size, grid_size))

    def invariant_measure(
        self,
        md: MatrixDistribution,
        G: int = FURSTENBERG_GRID,
        tol: float = FURSTENBERG_TOL,
        max_iter: int = FURSTENBERG_MAX_ITER,
    ) -> InvariantMeasure:
        """Неподвижная точка дискретной свертки m -> ν * m, итерации от равномерной меры.

        Args:
            md: Распределение матриц.
            G: Число бинов (не меньше 64).
            tol: Порог изменения по полной вариации.
            max_iter: Максимум итераций.

        Returns:
            Последняя итерация с невязкой; при исчерпании итераций флаг converged = False.
        """
        if G < FURSTENBERG_MIN_GRID:
            raise ValueError(f"сетка P¹ должна содержать не меньше {FURSTENBERG_MIN_GRID} бинов")
        start_time = time.perf_counter()
        with run_metrics.track("invariant_measure"):
            operator = self.transfer_operator(md, G)
            weights = np.full(G, 1.0 / G)
            residual = float("inf")
            iterations = 0
            while iterations < max_iter:
                updated = operator @ weights
                updated /= updated.sum()
                residual = 0.5 * float(np.abs(updated - weights).sum())
                weights = updated
                iterations += 1
                if residual < tol:
                    break

        converged = residual < tol
        elapsed = time.perf_counter() - start_time
        if converged:
            logger.info(f"Инвариантная мера (G = {G}) за {iterations} итераций, {elapsed:.3f}s")
        else:
            logger.warning(
                f"Инвариантная мера не сошлась за {iterations} итераций: невязка {residual:.3e}"
            )
        return InvariantMeasure(
            grid_size=G, weights=weights, residual=residual,
            iterations=iterations, converged=converged,
        )

    def furstenberg_gamma(self, md: MatrixDistribution, m: ProjectiveMeasure) -> float:
        """γ = Σ_M Σ_j w(M)·m_j·log‖M u(θ_j)‖."""
        u = np.stack([np.cos(m.centers()), np.sin(m.centers())])
        norms = np.linalg.norm(np.einsum("kij,jg->kig", md.matrices, u), axis=1)
        return float(md.weights @ np.log(norms) @ m.weights)

    def concentration_diagnostic(
        self, md: MatrixDistribution, m: ProjectiveMeasure, n: int, trials: int, seed: int
    ) -> float:
        """Средняя круговая дисперсия образа M_n(ω)·m; близость к 0 означает дираковскую меру.

        Args:
            md: Распределение матриц.
            m: Мера на P¹.
            n: Длина случайного произведения.
            trials: Число независимых произведений.
            seed: Зерно.

        Returns:
            Среднее 1 - |Σ m_j e^{2iθ'_j}| по испытаниям.
        """
        theta = m.centers()
        variances = []
        for trial in range(trials):
            index = stream(seed, trial).choice(md.size, size=n, p=md.weights)
            product = transfer_service.matrix_product(md.matrices[index])
            angles = _projective_angles(product.matrix[None, :, :], theta)[0]
            variances.append(1.0 - abs(np.sum(m.weights * np.exp(2j * angles))))
        return float(np.mean(variances))

    def anderson_distribution(self, dist: SiteDistribution, E: float) -> MatrixDistribution:
        """Распределение шаговых матриц [[E - v, -1], [1, 0]], индуцированное ν.

        Плотность разворачивается в квадратуру Гаусса-Лежандра по каждому куску.
        """
        if dist.is_atomic:
            points = np.array([x for x, _ in dist.atoms])
            weights = np.array([w for _, w in dist.atoms])
        else:
            nodes, gauss = np.polynomial.legendre.leggauss(QUADRATURE_NODES)
            points_list, weights_list = [], []
            for lo, hi, value in zip(dist.edges[:-1], dist.edges[1:], dist.values):
                if value <= 0:
                    continue
                half = (hi - lo) / 2.0
                points_list.append(lo + half * (nodes + 1.0))
                weights_list.append(value * half * gauss)
            points = np.concatenate(points_list)
            weights = np.concatenate(weights_list)
            weights = weights / weights.sum()
        matrices = np.zeros((len(points), 2, 2))
        matrices[:, 0, 0] = E - points
        matrices[:, 0, 1] = -1.0
        matrices[:, 1, 0] = 1.0
        return MatrixDistribution(matrices=matrices, weights=weights)

    def anderson_witnesses(self, dist: SiteDistribution, E: float, powers: int = 8) -> WitnessReport:
        """Унипотентные свидетели M_a M_b^{-1} = [[1, b - a], [0, 1]] и M_a^{-1} M_b.

        Первый фиксирует e₁, второй сдвигает его; рост норм степеней первого
        показывает некомпактность порожденной группы.
        """
        lo, hi = dist.support_intervals[0][0], dist.support_intervals[-1][1]
        if lo == hi:
            raise ValueError("носитель ν должен содержать хотя бы две точки")
        m_a = transfer_service.step_matrix(E, lo)
        m_b = transfer_service.step_matrix(E, hi)
        first = m_a @ m_b.inverse()
        second = m_a.inverse() @ m_b
        e1 = ProjectivePoint(theta=0.0)
        fixes = self.project_action(first, e1).distance(e1) < 1e-12
        moves = self.project_action(second, e1).distance(e1) > 1e-12
        log_norms = [
            float(np.log(np.linalg.norm(np.linalg.matrix_power(first.as_array(), 2 ** k), 2)))
            for k in range(powers)
        ]
        return WitnessReport(
            first=first, second=second, first_fixes_e1=fixes, second_moves_e1=moves,
            power_log_norms=log_norms,
        )

    @staticmethod
    def rotation_distribution(alpha: float) -> MatrixDistribution:
        """Одна матрица поворота на угол alpha (носитель в SO(2,R))."""
        c, s = math.cos(alpha), math.sin(alpha)
        return MatrixDistribution.from_list([(Sl2(a=c, b=-s, c=s, d=c), 1.0)])

    @staticmethod
    def diagonal_pair_distribution() -> MatrixDistribution:
        """{diag(2, ½), diag(½, 2)} с вероятностями ½: γ = 0 по закону больших чисел."""
        return MatrixDistribution.from_list([
            (Sl2(a=2.0, b=0.0, c=0.0, d=0.5), 0.5),
            (Sl2(a=0.5, b=0.0, c=0.0, d=2.0), 0.5),
        ])

    @staticmethod
    def diagonal_flip_distribution(p: float = 0.5) -> MatrixDistribution:
        """{diag(2, ½) с вероятностью p, поворот на π/2 с вероятностью 1 - p}.

        Множество {e₁, e₂} инвариантно, показатель равен нулю.
        """
        return MatrixDistribution.from_list([
            (Sl2(a=2.0, b=0.0, c=0.0, d=0.5), p),
            (Sl2(a=0.0, b=-1.0, c=1.0, d=0.0), 1.0 - p),
        ])

    def grid_refinement_study(self, md: MatrixDistribution, grids: Sequence[int]) -> RefinementStudy:
        """γ по формуле Фюрстенберга на вложенных сетках."""
        gammas = [self.furstenberg_gamma(md, self.invariant_measure(md, G)) for G in grids]
        differences = [abs(b - a) for a, b in zip(gammas[:-1], gammas[1:])]
        ratios = [
            b / a if a > 0 else float("inf") for a, b in zip(differences[:-1], differences[1:])
        ]
        return RefinementStudy(grids=list(grids), gammas=gammas, differences=differences, ratios=ratios)

    def support_monotonicity_study(
        self, md_list: Sequence[MatrixDistribution], G: int = FURSTENBERG_GRID
    ) -> List[InvariantMeasure]:
        """Инвариантные меры для вложенных носителей."""
        return [self.invariant_measure(md, G) for md in md_list]


# Создаем экземпляр сервиса
furstenberg_service = FurstenbergService()
