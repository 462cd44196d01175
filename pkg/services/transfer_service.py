import logging
import math
import time
from typing import List, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from config import config
from constants.defaults import CONTRACTING_SNAP_TOL, DET_BLOCK_LOG
from models.schemas import (
    LyapunovEstimate, MatrixDistribution, OseledecDirection, PotentialPath, ScaledProduct,
    SingularData, SiteDistribution, Sl2, SolutionGrowth
)
from services.model_service import model_service
from utils.errors import WindowError
from utils.metrics import run_metrics
from utils.parallel import map_realizations
from utils.rng import stream

# Настройка логирования
logger = logging.getLogger(__name__)


def _angle(value: float) -> float:
    """Приводит угол к [0, π)."""
    reduced = math.fmod(value, math.pi)
    if reduced < 0:
        reduced += math.pi
    return 0.0 if reduced >= math.pi else reduced


def _log_sigma_max(a: np.ndarray, b: np.ndarray, c: np.ndarray, d: np.ndarray) -> np.ndarray:
    """log σ_max нормированных матриц, поэлементно."""
    s = a * a + b * b + c * c + d * d
    det = a * d - b * c
    return 0.5 * np.log((s + np.sqrt(np.maximum(s * s - 4.0 * det * det, 0.0))) / 2.0)


class TransferService:
    """Сервис коцикла трансфер-матриц SL(2,R): произведения, показатели Ляпунова, направления Оселедеца."""

    def __init__(self):
        """Инициализация сервиса."""
        self.renorm_interval = config.RENORM_INTERVAL
        self.log_threshold = math.log(config.HYPERBOLIC_THRESHOLD)

    def step_matrix(self, E: float, v: float) -> Sl2:
        """Одношаговая матрица [[E - v, -1], [1, 0]]."""
        return Sl2(a=E - v, b=-1.0, c=1.0, d=0.0)

    def _propagate(self, E: float, potentials: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Произведения шаговых матриц для пачки траекторий.

        Args:
            E: Энергия.
            potentials: Массив (R, n) значений V(1..n) для R реализаций.

        Returns:
            Нормированные матрицы (R, 2, 2) и накопленные log-масштабы (R,).
        """
        count, steps = potentials.shape
        x = np.ascontiguousarray((E - potentials).T)
        a, b = np.ones(count), np.zeros(count)
        c, d = np.zeros(count), np.ones(count)
        log_scale = np.zeros(count)
        for step in range(steps):
            xs = x[step]
            # Новая верхняя строка (E - v)·(a, b) - (c, d), нижняя — старая верхняя
            a, b, c, d = xs * a - c, xs * b - d, a, b
            if (step + 1) % self.renorm_interval == 0 or step == steps - 1:
                scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.maximum(np.abs(c), np.abs(d)))
                a, b, c, d = a / scale, b / scale, c / scale, d / scale
                log_scale += np.log(scale)
        return np.stack([a, b, c, d], axis=-1).reshape(count, 2, 2), log_scale

    def _multiply(self, factors: np.ndarray, index: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Произведения M_{k_n} ⋯ M_{k_1} для пачки последовательностей индексов (R, n)."""
        count, steps = index.shape
        index = np.ascontiguousarray(index.T)
        a, b = np.ones(count), np.zeros(count)
        c, d = np.zeros(count), np.ones(count)
        log_scale = np.zeros(count)
        for step in range(steps):
            m = factors[index[step]]
            a, b, c, d = (
                m[:, 0, 0] * a + m[:, 0, 1] * c, m[:, 0, 0] * b + m[:, 0, 1] * d,
                m[:, 1, 0] * a + m[:, 1, 1] * c, m[:, 1, 0] * b + m[:, 1, 1] * d,
            )
            if (step + 1) % self.renorm_interval == 0 or step == steps - 1:
                scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.maximum(np.abs(c), np.abs(d)))
                a, b, c, d = a / scale, b / scale, c / scale, d / scale
                log_scale += np.log(scale)
        return np.stack([a, b, c, d], axis=-1).reshape(count, 2, 2), log_scale

    def cocycle_product(self, E: float, path: PotentialPath, n: int) -> ScaledProduct:
        """M_{E,ω}(n) = A(n) ⋯ A(1) по узлам 1..n траектории.

        Args:
            E: Энергия.
            path: Траектория, покрывающая узлы 1..n.
            n: Число шагов.

        Returns:
            Перенормированное произведение.
        """
        return self.block_product(E, path, 0, n)

    def block_product(self, E: float, path: PotentialPath, start: int, n: int) -> ScaledProduct:
        """Произведение по узлам start+1..start+n, т.е. M(n) для сдвинутой траектории T^start ω."""
        if n < 1:
            raise WindowError("число шагов должно быть не меньше 1")
        values = path.sites(start + 1, start + n)
        matrices, log_scale = self._propagate(E, values[None, :])
        return ScaledProduct(matrix=matrices[0], log_scale=float(log_scale[0]), steps=n)

    def leftward_product(self, E: float, path: PotentialPath, n: int) -> ScaledProduct:
        """Произведение по узлам -1..-n, полученное отражением окна."""
        return self.cocycle_product(E, path.reflect(), n)

    def matrix_product(self, matrices: Union[np.ndarray, Sequence[Sl2]]) -> ScaledProduct:
        """Произведение M_n ⋯ M_1 произвольной последовательности (элемент 0 действует первым)."""
        factors = np.array([m.as_array() if isinstance(m, Sl2) else m for m in matrices], dtype=float)
        index = np.arange(len(factors))[None, :]
        product, log_scale = self._multiply(factors, index)
        return ScaledProduct(matrix=product[0], log_scale=float(log_scale[0]), steps=len(factors))

    def singular_data(self, product: ScaledProduct) -> SingularData:
        """Сингулярные направления в замкнутой форме полярного разложения 2×2.

        Правые векторы — собственные векторы MᵀM, левые — MMᵀ; сжимаемое
        направление ортогонально растущему.
        """
        (a, b), (c, d) = product.matrix
        theta_top = 0.5 * math.atan2(2.0 * (a * b + c * d), a * a + c * c - b * b - d * d)
        phi_top = 0.5 * math.atan2(2.0 * (a * c + b * d), a * a + b * b - c * c - d * d)
        return SingularData(
            theta_top=_angle(theta_top),
            theta_bottom=_angle(theta_top + math.pi / 2.0),
            phi_top=_angle(phi_top),
            log_sigma_max=product.log_norm(),
        )

    def contracting_direction(self, product: ScaledProduct) -> OseledecDirection:
        """Наиболее сжимаемое правое сингулярное направление и признак гиперболичности."""
        data = self.singular_data(product)
        converged = data.log_sigma_max > self.log_threshold
        if not converged:
            logger.warning(
                f"Произведение не гиперболично: log‖T_n‖ = {data.log_sigma_max:.3f}, "
                f"направление помечено как несошедшееся"
            )
        return OseledecDirection(
            theta=data.theta_bottom, converged=converged, log_norm=data.log_sigma_max
        )

    def oseledec_direction(self, E: float, path: PotentialPath, n: int) -> OseledecDirection:
        """Направление θ_n, сжимаемое произведением M_{E,ω}(n)."""
        return self.contracting_direction(self.cocycle_product(E, path, n))

    def lyapunov_scan(
        self, dist: SiteDistribution, energies: Sequence[float], n: int, realizations: int, seed: int
    ) -> List[LyapunovEstimate]:
        """Оценки γ(E) на сетке энергий по общим траекториям.

        Args:
            dist: Одноузельное распределение.
            energies: Энергии.
            n: Число шагов.
            realizations: Число реализаций.
            seed: Зерно.

        Returns:
            Оценки в порядке энергий.
        """
        if n < 1000:
            logger.warning(f"Оценка показателя Ляпунова на коротком произведении n = {n}")
        start_time = time.perf_counter()
        paths = map_realizations(
            lambda k: model_service.sample_path(dist, seed, k, (1, n)).values, range(realizations)
        )
        potentials = np.vstack(paths)
        results = []
        for E in energies:
            with run_metrics.track("lyapunov_estimate"):
                matrices, log_scale = self._propagate(float(E), potentials)
                log_norms = log_scale + _log_sigma_max(
                    matrices[:, 0, 0], matrices[:, 0, 1], matrices[:, 1, 0], matrices[:, 1, 1]
                )
                results.append(self._summarize(float(E), log_norms / n, n))
        logger.info(
            f"Показатели Ляпунова для {len(results)} энергий (n = {n}, R = {realizations}) "
            f"за {time.perf_counter() - start_time:.3f}s"
        )
        return results

    def lyapunov_estimate(
        self, dist: SiteDistribution, E: float, n: int, realizations: int, seed: int
    ) -> LyapunovEstimate:
        """Среднее по реализациям (1/n)·log‖M_{E,ω}(n)‖ с стандартной ошибкой."""
        return self.lyapunov_scan(dist, [E], n, realizations, seed)[0]

    def matrix_product_lyapunov(
        self, md: MatrixDistribution, n: int, realizations: int, seed: int
    ) -> LyapunovEstimate:
        """Прямая оценка показателя для произвольного конечного распределения матриц."""
        with run_metrics.track("matrix_product_lyapunov"):
            index = np.vstack([
                stream(seed, k).choice(md.size, size=n, p=md.weights) for k in range(realizations)
            ])
            matrices, log_scale = self._multiply(md.matrices, index)
            log_norms = log_scale + _log_sigma_max(
                matrices[:, 0, 0], matrices[:, 0, 1], matrices[:, 1, 0], matrices[:, 1, 1]
            )
        return self._summarize(float("nan"), log_norms / n, n)

    @staticmethod
    def _summarize(E: float, gammas: np.ndarray, n: int) -> LyapunovEstimate:
        count = len(gammas)
        stderr = float(np.std(gammas, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
        return LyapunovEstimate(
            energy=E, gamma_hat=float(np.mean(gammas)), stderr=stderr, steps=n, realizations=count
        )

    @staticmethod
    def constant_potential_gamma(E: float, a: float = 0.0) -> float:
        """γ(E) для постоянного потенциала a: arccosh(|E - a|/2) вне зоны, 0 внутри."""
        shifted = abs(E - a)
        return math.acosh(shifted / 2.0) if shifted > 2.0 else 0.0

    def solution_growth(
        self, E: float, path: PotentialPath, initial: Sequence[float], n: int
    ) -> SolutionGrowth:
        """Логарифмы норм ‖M_m · v‖ для m = 0..n.

        Начальный вектор раскладывается по сингулярным направлениям M_n. Растущая
        компонента ведется вперед, сжимаемая — назад от шага n через обратные
        шаговые матрицы [[0, 1], [-1, E - v]], где она сама растет. Компоненты
        меньше CONTRACTING_SNAP_TOL от нормы считаются нулевыми.

        Args:
            E: Энергия.
            path: Траектория, покрывающая узлы 1..n.
            initial: Ненулевой начальный вектор (u(1), u(0)).
            n: Число шагов.

        Returns:
            Точки (m, log‖M_m v‖) и наклон по второй половине диапазона.
        """
        vector = np.asarray(initial, dtype=float)
        norm = float(np.linalg.norm(vector))
        if vector.shape != (2,) or norm == 0.0:
            raise ValueError("начальный вектор должен быть ненулевым вектором из R²")
        x = E - path.sites(1, n)
        product = self.cocycle_product(E, path, n)
        data = self.singular_data(product)

        v_top = np.array([math.cos(data.theta_top), math.sin(data.theta_top)])
        # Для SL(2,R): M (Jᵀ v) = σ⁻¹ Jᵀ (M v / σ), Jᵀ(x, y) = (y, -x)
        v_bottom = np.array([v_top[1], -v_top[0]])
        u_top = product.matrix @ v_top
        u_top /= np.linalg.norm(u_top)
        u_bottom = np.array([u_top[1], -u_top[0]])

        alpha = float(vector @ v_top)
        beta = float(vector @ v_bottom)
        if abs(alpha) < CONTRACTING_SNAP_TOL * norm:
            alpha = 0.0
        if abs(beta) < CONTRACTING_SNAP_TOL * norm:
            beta = 0.0

        # Растущая компонента: вперед
        grow_log = np.zeros(n + 1)
        grow_dir = np.zeros((n + 1, 2))
        grow_dir[0] = v_top
        current = v_top.copy()
        for m in range(n):
            current = np.array([x[m] * current[0] - current[1], current[0]])
            scale = float(np.linalg.norm(current))
            current /= scale
            grow_log[m + 1] = grow_log[m] + math.log(scale)
            grow_dir[m + 1] = current

        # Сжимаемая компонента: назад от M_n v_bottom = σ_min u_bottom
        shrink_log = np.zeros(n + 1)
        shrink_dir = np.zeros((n + 1, 2))
        shrink_log[n] = -data.log_sigma_max
        shrink_dir[n] = u_bottom
        current = u_bottom.copy()
        for m in range(n - 1, -1, -1):
            current = np.array([current[1], -current[0] + x[m] * current[1]])
            scale = float(np.linalg.norm(current))
            current /= scale
            shrink_log[m] = shrink_log[m + 1] + math.log(scale)
            shrink_dir[m] = current

        points = []
        for m in range(n + 1):
            parts = []
            if alpha != 0.0:
                parts.append((math.log(abs(alpha)) + grow_log[m], math.copysign(1.0, alpha) * grow_dir[m]))
            if beta != 0.0:
                parts.append((math.log(abs(beta)) + shrink_log[m], math.copysign(1.0, beta) * shrink_dir[m]))
            reference = max(level for level, _ in parts)
            total = sum(math.exp(level - reference) * direction for level, direction in parts)
            points.append((m, reference + math.log(float(np.linalg.norm(total)))))

        tail = points[n // 2:]
        fit = stats.linregress([m for m, _ in tail], [value for _, value in tail])
        return SolutionGrowth(
            points=points, slope=float(fit.slope),
            expanding_component=alpha, contracting_component=beta,
        )

    def kingman_defect(self, E: float, path: PotentialPath, n: int, m: int) -> float:
        """log‖M(n+m)‖ - log‖M(n)‖ - log‖M(m)∘T^n‖; субмультипликативность дает ≤ 0."""
        whole = self.block_product(E, path, 0, n + m).log_norm()
        head = self.block_product(E, path, 0, n).log_norm()
        tail = self.block_product(E, path, n, m).log_norm()
        return whole - head - tail

    def adjoint_alignment(self, product: ScaledProduct, w: Sequence[float]) -> Tuple[float, float]:
        """Пара (‖M* w‖/‖M*‖, |⟨w, u_top⟩|) для единичного w; u_top — верхнее левое направление."""
        w = np.asarray(w, dtype=float)
        matrix = product.matrix
        sigma = math.exp(product.log_norm() - product.log_scale)
        ratio = float(np.linalg.norm(matrix.T @ w)) / sigma
        data = self.singular_data(product)
        u_top = np.array([math.cos(data.phi_top), math.sin(data.phi_top)])
        return ratio, abs(float(w @ u_top))

    def determinant_defect(self, E: float, path: PotentialPath, n: int) -> float:
        """Дефект det M(n) = 1 для перенормированных произведений.

        Окно 1..n режется на блоки, в которых ‖M‖² ≤ exp(2·DET_BLOCK_LOG); для
        каждого блока сравнивается exp(2·log_scale)·det(matrix) с 1. Для всего
        произведения log‖M(n) e1‖ из нормированной матрицы и log_scale
        сравнивается с тем же логарифмом, накопленным QR-итерацией по вектору.

        Returns:
            Наибольший из дефектов блоков и расхождения логарифмов.
        """
        if n < 1:
            raise WindowError("число шагов должно быть не меньше 1")
        x = E - path.sites(1, n)
        widest = float(np.max(np.abs(x)))
        log_step = math.log((widest + math.sqrt(widest * widest + 4.0)) / 2.0)
        block = n if log_step == 0.0 else max(1, int(DET_BLOCK_LOG / log_step))

        worst = 0.0
        for start in range(0, n, block):
            piece = self.block_product(E, path, start, min(block, n - start))
            worst = max(worst, abs(piece.determinant() - 1.0))

        log_column = 0.0
        q = (1.0, 0.0)
        for xs in x:
            u = (xs * q[0] - q[1], q[0])
            r = math.hypot(*u)
            q = (u[0] / r, u[1] / r)
            log_column += math.log(r)
        product = self.cocycle_product(E, path, n)
        scaled_column = product.log_scale + math.log(float(np.linalg.norm(product.matrix[:, 0])))
        return max(worst, abs(scaled_column - log_column))


# Создаем экземпляр сервиса
transfer_service = TransferService()
