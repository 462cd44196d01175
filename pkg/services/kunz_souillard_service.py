"""Дискретные интегральные операторы Кунца-Суйяра U, T0, T1 на прямой.

Функции задаются средними по ячейкам равномерной сетки на [-X, X]. Инверсия
y = 1/u переносит массу между ячейками точно (матрицы пересечений ячеек),
а ядро r(E - x - u) усредняется по паре ячеек через вторую разность
G = ∫F. Поэтому дискретные операторы — проекции непрерывных и наследуют
оценки ‖W‖_{1,1} ≤ 1, ‖U‖_{2,2} ≤ 1, ‖K‖ ≤ 1 без ошибки квадратуры.
"""

import logging
import math
import time
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, sparse
from scipy.signal import fftconvolve
from scipy.sparse.linalg import LinearOperator, svds
from tenacity import Retrying, before_sleep_log, retry_if_exception_type, stop_after_attempt

from constants.defaults import (
    DEGENERATE_PHI0, JACOBIAN_STEP, KS_ASSEMBLY_N, KS_E_POINTS, KS_GRID_N, KS_GRID_X, KS_REFINE_N, KS_REFINE_X,
    POWER_ITERATIONS, POWER_TOL
)
from models.schemas import (
    DecayBound, FiniteHamiltonian, GridFunction, JacobianCheck, NormReport, RealGrid, RhoOperatorResult,
    RouteComparison, SiteDistribution
)
from services.dynamics_service import dynamics_service
from services.model_service import model_service
from services.spectra_service import spectra_service
from utils.errors import DegenerateChangeOfVariables, DistributionError, WindowError
from utils.metrics import run_metrics
from utils.parallel import map_realizations
from utils.rng import stream

# Настройка логирования
logger = logging.getLogger(__name__)

ASSEMBLY_BLOCK = 256  # столбцов за один проход сборки


@lru_cache(maxsize=8)
def _inversion_matrices(half_width: float, points: int) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Матрицы W (вес u^{-2}) и U (вес |u|^{-1}) переноса f(1/u) между ячейками."""
    h = 2.0 * half_width / points
    edges = -half_width + np.arange(points + 1) * h
    edges[points // 2] = 0.0
    alpha, beta = edges[:-1], edges[1:]
    with np.errstate(divide="ignore"):
        y_lo = np.where(beta == 0.0, -np.inf, 1.0 / np.where(beta == 0.0, 1.0, beta))
        y_hi = np.where(alpha == 0.0, np.inf, 1.0 / np.where(alpha == 0.0, 1.0, alpha))
    y_lo = np.clip(y_lo, -half_width, half_width)
    y_hi = np.clip(y_hi, -half_width, half_width)

    first = np.clip(np.floor((y_lo + half_width) / h).astype(np.int64), 0, points - 1)
    last = np.clip(np.ceil((y_hi + half_width) / h).astype(np.int64) - 1, 0, points - 1)
    count = np.where(y_hi > y_lo, np.maximum(last - first + 1, 0), 0)

    rows = np.repeat(np.arange(points), count)
    starts = np.cumsum(count) - count
    cols = first[rows] + (np.arange(int(count.sum())) - np.repeat(starts, count))
    a = np.maximum(edges[cols], y_lo[rows])
    b = np.minimum(edges[cols + 1], y_hi[rows])
    length = np.maximum(b - a, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_length = np.where(
            length > 0, np.abs(np.log(np.abs(np.where(length > 0, b, 1.0)))
                               - np.log(np.abs(np.where(length > 0, a, 1.0)))), 0.0
        )
    shape = (points, points)
    W = sparse.csr_matrix((length / h, (rows, cols)), shape=shape)
    U = sparse.csr_matrix((log_length / h, (rows, cols)), shape=shape)
    return W, U


class KsOperators:
    """Операторы T0 = K W, T1 = K U при фиксированной энергии E на сетке.

    (K g)(x) = ∫ r(E - x - u) g(u) du — ганкелева корреляция, применяемая через FFT.
    """

    def __init__(self, dist: SiteDistribution, E: float, grid: RealGrid):
        """Инициализация операторов.

        Args:
            dist: Распределение с ограниченной плотностью r.
            E: Энергия.
            grid: Сетка средних точек.
        """
        if dist.is_atomic:
            raise DistributionError("операторы Кунца-Суйяра требуют плотность r")
        self.dist = dist
        self.energy = E
        self.grid = grid
        h, n = grid.spacing, grid.points
        t = (np.arange(2 * n - 1) + 1 - n) * h
        c = E - t
        G = dist.cdf_integral
        lo, hi = dist.support_intervals[0][0], dist.support_intervals[-1][1]
        # вне носителя G линейна, вторая разность там равна нулю точно
        active = (c + h > lo) & (c - h < hi)
        second = np.where(active, G(c + h) - 2.0 * G(c) + G(c - h), 0.0)
        self.stencil = np.maximum(second / h ** 2, 0.0)
        self.W, self.U = _inversion_matrices(grid.half_width, grid.points)

    @property
    def size(self) -> int:
        return self.grid.points

    def stencil_mass(self) -> float:
        """h·Σρ: доля массы r_E, попавшая в окно (1 для носителя внутри сетки)."""
        return float(self.grid.spacing * self.stencil.sum())

    def phi(self) -> np.ndarray:
        """φ(x) = r(E - x), средние по ячейкам."""
        x, h = self.grid.nodes, self.grid.spacing
        F = self.dist.cdf
        return (F(self.energy - x + h / 2.0) - F(self.energy - x - h / 2.0)) / h

    def apply_K(self, values: np.ndarray) -> np.ndarray:
        n = self.size
        return fftconvolve(self.stencil, values[::-1])[n - 1:2 * n - 1] * self.grid.spacing

    def apply_U(self, values: np.ndarray) -> np.ndarray:
        return self.U @ values

    def apply_U_adjoint(self, values: np.ndarray) -> np.ndarray:
        return self.U.T @ values

    def apply_T0(self, values: np.ndarray) -> np.ndarray:
        return self.apply_K(self.W @ values)

    def apply_T0_adjoint(self, values: np.ndarray) -> np.ndarray:
        return self.W.T @ self.apply_K(values)

    def apply_T1(self, values: np.ndarray) -> np.ndarray:
        return self.apply_K(self.U @ values)

    def apply_T1_adjoint(self, values: np.ndarray) -> np.ndarray:
        return self.U.T @ self.apply_K(values)

    def _t0_blocks(self):
        n = self.size
        for start in range(0, n, ASSEMBLY_BLOCK):
            block = self.W[:, start:start + ASSEMBLY_BLOCK].toarray()
            columns = fftconvolve(self.stencil[:, None], block[::-1, :], axes=0)
            yield start, columns[n - 1:2 * n - 1, :] * self.grid.spacing

    def assemble_T0(self) -> np.ndarray:
        """Плотная матрица T0 (только для сеток N ≤ KS_ASSEMBLY_N)."""
        if self.size > KS_ASSEMBLY_N:
            raise ValueError(f"сборка T0 допускается только при N ≤ {KS_ASSEMBLY_N}")
        matrix = np.zeros((self.size, self.size))
        for start, columns in self._t0_blocks():
            matrix[:, start:start + columns.shape[1]] = columns
        return matrix

    def t0_column_l2(self) -> np.ndarray:
        """Евклидовы нормы столбцов T0 без хранения всей матрицы."""
        norms = np.zeros(self.size)
        for start, columns in self._t0_blocks():
            norms[start:start + columns.shape[1]] = np.linalg.norm(columns, axis=0)
        return norms


def _power_norm(
    apply: Callable[[np.ndarray], np.ndarray], adjoint: Callable[[np.ndarray], np.ndarray], size: int
) -> float:
    """Наибольшее сингулярное число степенным методом на AᵀA с детерминированным стартом."""
    vector = np.full(size, 1.0 / math.sqrt(size))
    sigma = 0.0
    for _ in range(POWER_ITERATIONS):
        image = apply(vector)
        estimate = float(np.linalg.norm(image))
        back = adjoint(image)
        length = float(np.linalg.norm(back))
        if length == 0.0:
            return 0.0
        vector = back / length
        if abs(estimate - sigma) <= POWER_TOL * estimate:
            return estimate
        sigma = estimate
    return sigma


class KunzSouillardService:
    """Сервис метода Кунца-Суйяра: нормы операторов, ρ_L через произведения операторов, якобиан."""

    def op_U(self, f: GridFunction) -> GridFunction:
        """(Uf)(x) = |x|^{-1} f(1/x), вне [-X, X] функция равна нулю."""
        _, U = _inversion_matrices(f.grid.half_width, f.grid.points)
        return f.with_values(U @ f.values)

    def op_T0(self, ops: KsOperators, f: GridFunction) -> GridFunction:
        """T0 f(x) = ∫ r(E - x - 1/y) f(y) dy = K(W f)."""
        return f.with_values(ops.apply_T0(f.values))

    def op_T1(self, ops: KsOperators, f: GridFunction) -> GridFunction:
        """T1 f(x) = ∫ r(E - x - 1/y) |y|^{-1} f(y) dy = K(U f)."""
        return f.with_values(ops.apply_T1(f.values))

    def energy_grid(self, dist: SiteDistribution, e_points: int) -> np.ndarray:
        """Равномерная сетка энергий на Σ0."""
        lo, hi = model_service.sigma0(dist)
        return np.linspace(lo, hi, e_points)

    def norms_at(
        self, dist: SiteDistribution, E: float, grid: RealGrid, assembly_grid: Optional[RealGrid] = None
    ) -> Tuple[float, float, float, float]:
        """(‖T0‖₁→₁, ‖T0‖₁→₂, ‖T1‖₂→₂, ‖T1²‖₂→₂) при энергии E.

        ‖T0‖₁→₁ — наибольшая сумма столбца (все элементы неотрицательны, поэтому
        это (K·1)ᵀW); ‖T0‖₁→₂ — наибольшая L²-норма столбца собранной матрицы на
        сетке сборки; нормы 2→2 — степенным методом.
        """
        ops = KsOperators(dist, E, grid)
        column_sums = ops.W.T @ ops.apply_K(np.ones(ops.size))
        t0_11 = float(column_sums.max())

        assembly = ops if assembly_grid is None or assembly_grid == grid else KsOperators(dist, E, assembly_grid)
        t0_12 = float(assembly.t0_column_l2().max() / math.sqrt(assembly.grid.spacing))

        t1_22 = _power_norm(ops.apply_T1, ops.apply_T1_adjoint, ops.size)
        t1sq_22 = _power_norm(
            lambda v: ops.apply_T1(ops.apply_T1(v)),
            lambda v: ops.apply_T1_adjoint(ops.apply_T1_adjoint(v)),
            ops.size,
        )
        return t0_11, t0_12, t1_22, t1sq_22

    def norm_certify(
        self,
        dist: SiteDistribution,
        e_points: int = KS_E_POINTS,
        half_width: float = KS_GRID_X,
        points: int = KS_GRID_N,
        assembly_points: int = KS_ASSEMBLY_N,
    ) -> NormReport:
        """Оценки норм по сетке энергий на Σ0 и бюджет по удвоению сетки N -> 2N.

        Args:
            dist: Распределение с плотностью.
            e_points: Число энергий на Σ0.
            half_width: Полуширина X сетки.
            points: Число узлов N.
            assembly_points: Число узлов сетки сборки для ‖T0‖₁→₂.

        Returns:
            Отчет; converged = False, если бюджет больше 10% запаса δ = 1 - sup‖T1²‖.
        """
        start_time = time.perf_counter()
        energies = self.energy_grid(dist, e_points)
        grid = RealGrid(half_width=half_width, points=points)
        fine = RealGrid(half_width=half_width, points=2 * points)
        assembly = RealGrid(half_width=half_width, points=min(points, assembly_points))

        with run_metrics.track("norm_certify"):
            base = np.array(map_realizations(
                lambda i: self.norms_at(dist, float(energies[i]), grid, assembly), range(len(energies))
            ))
            refined = np.array(map_realizations(
                lambda i: self.norms_at(dist, float(energies[i]), fine, assembly), range(len(energies))
            ))

        # ‖T0‖₁→₂ считается на одной сетке сборки и в бюджет не входит
        gaps = np.abs(refined - base)[:, [0, 2, 3]]
        budget = float(gaps.max())
        sup = base.max(axis=0)
        delta = 1.0 - float(sup[3])
        converged = delta > 0 and budget <= 0.1 * delta
        report = NormReport(
            energies=energies.tolist(),
            t0_11=base[:, 0].tolist(), t0_12=base[:, 1].tolist(),
            t1_22=base[:, 2].tolist(), t1sq_22=base[:, 3].tolist(),
            sup_t0_11=float(sup[0]), sup_t0_12=float(sup[1]),
            sup_t1_22=float(sup[2]), sup_t1sq_22=float(sup[3]),
            spread_t1sq_22=float(base[:, 3].max() - base[:, 3].min()),
            budget=budget, delta=delta, converged=converged,
        )
        elapsed = time.perf_counter() - start_time
        if converged:
            logger.info(f"Нормы сертифицированы: δ = {delta:.4f}, бюджет {budget:.2e}, {elapsed:.3f}s")
        else:
            logger.warning(f"Сертификат норм не сошелся: δ = {delta:.4f}, бюджет {budget:.2e}")
        return report

    def singular_value_decay(self, ops: KsOperators, k: int = 10) -> np.ndarray:
        """Старшие сингулярные числа дискретного T1² по убыванию (свидетельство компактности)."""
        n = ops.size
        operator = LinearOperator(
            (n, n), dtype=float,
            matvec=lambda v: ops.apply_T1(ops.apply_T1(np.ravel(v))),
            rmatvec=lambda v: ops.apply_T1_adjoint(ops.apply_T1_adjoint(np.ravel(v))),
        )
        values = svds(operator, k=k, return_singular_vectors=False, v0=np.ones(n))
        return np.sort(values)[::-1]

    def _rho_profile_once(
        self, dist: SiteDistribution, L: int, m_values: Sequence[int], energies: np.ndarray, grid: RealGrid
    ) -> np.ndarray:
        def at_energy(i: int) -> np.ndarray:
            ops = KsOperators(dist, float(energies[i]), grid)
            powers = [ops.phi()]
            for _ in range(L):
                powers.append(ops.apply_T0(powers[-1]))
            right = ops.apply_U(powers[L])
            pairings = []
            for m in m_values:
                left = powers[L - m]
                for _ in range(m - 1):
                    left = ops.apply_T1(left)
                pairings.append(grid.spacing * float(left @ right))
            return np.array(pairings)

        integrand = np.array(map_realizations(at_energy, range(len(energies))))
        return integrate.trapezoid(integrand, energies, axis=0)

    def rho_operator_profile(
        self,
        dist: SiteDistribution,
        L: int,
        m_values: Sequence[int],
        e_points: int = KS_E_POINTS,
        half_width: float = KS_GRID_X,
        points: int = KS_GRID_N,
        refine_x: float = KS_REFINE_X,
        refine_n: int = KS_REFINE_N,
    ) -> List[RhoOperatorResult]:
        """ρ_L(m, 0) = ∫_{Σ0} ⟨T1^{m-1} T0^{L-m} φ, U T0^L φ⟩ dE для нескольких m.

        Значение берется с уточненного прогона на сетке (refine_x·X, refine_n·N)
        с 2·e_points - 1 энергиями; бюджет — разность с базовым прогоном.
        При значениях по умолчанию уточненный прогон в 4 раза дороже базового
        на каждую энергию.
        """
        for m in m_values:
            if not 1 <= m <= L:
                raise WindowError(f"m = {m} вне диапазона [1, {L}]")
        start_time = time.perf_counter()
        with run_metrics.track("rho_operator"):
            coarse = self._rho_profile_once(
                dist, L, m_values, self.energy_grid(dist, e_points),
                RealGrid(half_width=half_width, points=points),
            )
            fine = self._rho_profile_once(
                dist, L, m_values, self.energy_grid(dist, 2 * e_points - 1),
                RealGrid(half_width=refine_x * half_width, points=refine_n * points),
            )
        logger.info(
            f"ρ_{L}(m, 0) через операторы для m = {list(m_values)} за {time.perf_counter() - start_time:.3f}s"
        )
        return [
            RhoOperatorResult(L=L, m=m, value=float(f), coarse_value=float(c), budget=float(abs(f - c)))
            for m, c, f in zip(m_values, coarse, fine)
        ]

    def rho_operator(
        self,
        dist: SiteDistribution,
        L: int,
        m: int,
        e_points: int = KS_E_POINTS,
        half_width: float = KS_GRID_X,
        points: int = KS_GRID_N,
    ) -> RhoOperatorResult:
        return self.rho_operator_profile(dist, L, [m], e_points, half_width, points)[0]

    def route_comparison(
        self,
        dist: SiteDistribution,
        profile: Sequence[RhoOperatorResult],
        realizations: int,
        seed: int,
    ) -> List[RouteComparison]:
        """Сверяет ρ_L(m, 0) через операторы с выборочным средним по реализациям.

        Args:
            dist: Распределение с плотностью.
            profile: Результаты rho_operator_profile.
            realizations: Число реализаций Монте-Карло.
            seed: Зерно.

        Returns:
            Сравнения по m; agrees при |op - mc| ≤ 3·(stderr + budget).
        """
        comparisons = []
        for result in profile:
            estimate = dynamics_service.rho_L_monte_carlo(dist, result.L, result.m, 0, realizations, seed)
            comparison = RouteComparison.compare(result, estimate.value, estimate.stderr)
            if not comparison.agrees:
                logger.warning(
                    f"ρ_{result.L}({result.m}, 0): операторы {comparison.rho_operator:.6f}, "
                    f"Монте-Карло {comparison.rho_mc:.6f} ± {comparison.stderr:.2e}, "
                    f"бюджет {comparison.budget:.2e}"
                )
            comparisons.append(comparison)
        return comparisons

    def decay_bounds(
        self, dist: SiteDistribution, report: NormReport, profile: Sequence[RhoOperatorResult]
    ) -> List[DecayBound]:
        """Оценка ρ_L(m, 0) ≤ sup‖T1²‖^{(m-2)/2}·r_max·|Σ0| для каждого m профиля."""
        lo, hi = model_service.sigma0(dist)
        return [
            DecayBound(
                m=result.m, value=result.value, budget=result.budget,
                bound=report.sup_t1sq_22 ** ((result.m - 2) / 2.0) * dist.r_max * (hi - lo),
            )
            for result in profile
        ]

    def _coordinates(self, L: int, V: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """(x_{-L..-1}, E, x_{1..L}): x_n = φ(n+1)/φ(n) при n < 0 и φ(n-1)/φ(n) при n > 0."""
        es = spectra_service.diagonalize(FiniteHamiltonian(L=L, diagonal=V))
        phi = es.eigenvectors[:, k]
        left = phi[1:L + 1] / phi[:L]
        right = phi[L:2 * L] / phi[L + 1:]
        return np.concatenate([left, [es.eigenvalues[k]], right]), phi

    def jacobian_check(self, L: int, V: Sequence[float], k: int) -> JacobianCheck:
        """Сравнивает якобиан замены V <-> (x, E) с φ_k(0)^{-2}.

        Args:
            L: Полуширина окна.
            V: Потенциал на узлах -L..L.
            k: Номер собственного значения (по возрастанию).

        Returns:
            Численный и замкнутый определители и относительный дефект.

        Raises:
            DegenerateChangeOfVariables: Если |φ_k(0)| < 1e-8.
        """
        V = np.asarray(V, dtype=float)
        coords, phi = self._coordinates(L, V, k)
        phi0 = float(phi[L])
        if abs(phi0) < DEGENERATE_PHI0:
            raise DegenerateChangeOfVariables(
                f"|φ_k(0)| = {abs(phi0):.2e} < {DEGENERATE_PHI0}; выберите другой потенциал"
            )
        if np.min(np.abs(phi)) < DEGENERATE_PHI0:
            raise DegenerateChangeOfVariables("нулевая компонента собственного вектора: отношения x_n не определены")
        size = 2 * L + 1
        jacobian = np.zeros((size, size))
        for i in range(size):
            step = np.zeros(size)
            step[i] = JACOBIAN_STEP
            forward, _ = self._coordinates(L, V + step, k)
            backward, _ = self._coordinates(L, V - step, k)
            jacobian[:, i] = (forward - backward) / (2.0 * JACOBIAN_STEP)
        # Нужен якобиан обратного отображения (x, E) -> V
        det_numeric = 1.0 / abs(float(np.linalg.det(jacobian)))

        x_left, x_right = coords[:L][::-1], coords[L + 1:]
        left_products = np.cumprod(x_left ** -2.0)
        right_products = np.cumprod(x_right ** -2.0)
        det_closed = 1.0 + float(left_products.sum()) + float(right_products.sum())

        ratios = np.abs(phi) / abs(phi0)
        predicted = np.concatenate([np.sqrt(left_products)[::-1], [1.0], np.sqrt(right_products)])
        target = phi0 ** -2.0
        return JacobianCheck(
            L=L, k=k, det_numeric=det_numeric, det_closed_form=det_closed,
            phi0_inverse_square=target,
            relative_defect=abs(det_numeric - target) / target,
            ratio_defect=float(np.max(np.abs(ratios - predicted))),
        )

    def jacobian_survey(self, L_values: Sequence[int], instances: int, seed: int) -> List[JacobianCheck]:
        """Проверка якобиана на случайных потенциалах; вырожденные случаи перевыбираются."""
        results = []
        for L in L_values:
            for instance in range(instances):
                for attempt in Retrying(
                    retry=retry_if_exception_type(DegenerateChangeOfVariables),
                    stop=stop_after_attempt(5),
                    before_sleep=before_sleep_log(logger, logging.WARNING),
                    reraise=True,
                ):
                    with attempt:
                        rng = stream(seed, L, instance, attempt.retry_state.attempt_number)
                        V = rng.uniform(-1.0, 1.0, 2 * L + 1)
                        k = int(rng.integers(2 * L + 1))
                        results.append(self.jacobian_check(L, V, k))
        return results


# Создаем экземпляр сервиса
kunz_souillard_service = KunzSouillardService()
