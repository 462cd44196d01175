import cmath
import logging
import math
from typing import Sequence

import numpy as np
from scipy import integrate

from constants.defaults import LAMBDA_MAX, QUAD_LIMIT, TAIL_TOLERANCE
from models.schemas import (
    DenseOperator, EigenSystem, FiniteHamiltonian, HerglotzSample, SelfAdjointOperator,
    SpectralAverageResult
)
from services.spectra_service import spectra_service
from utils.errors import ResolventError, TailBudgetError
from utils.metrics import run_metrics
from utils.rng import stream

# Настройка логирования
logger = logging.getLogger(__name__)


def _check_off_axis(z: complex) -> None:
    if complex(z).imag == 0:
        raise ResolventError(f"резольвента не определена на вещественной оси: z = {z}")


def _cross_ratio(a: complex, b: complex, c: complex, d: complex) -> complex:
    return (a - c) * (b - d) / ((a - d) * (b - c))


class RankOneService:
    """Сервис ранг-один возмущений: преобразование Бореля, формула Ароншайна-Крейна, спектральное усреднение."""

    def _transform(self, es: EigenSystem, phi: np.ndarray, z: complex) -> complex:
        weights = (es.eigenvectors.T @ phi) ** 2
        return complex(np.sum(weights / (es.eigenvalues - z)))

    def borel_transform(self, H: SelfAdjointOperator, phi: np.ndarray, z: complex) -> HerglotzSample:
        """F(z) = ⟨φ, (H - z)^{-1} φ⟩ = Σ_k |⟨φ_k, φ⟩|²/(E_k - z).

        Args:
            H: Самосопряженный оператор.
            phi: Единичный вектор.
            z: Точка вне вещественной оси.

        Returns:
            Значение функции Герглотца.
        """
        _check_off_axis(z)
        es = spectra_service.diagonalize(H)
        return HerglotzSample(z=complex(z), F=self._transform(es, np.asarray(phi, dtype=float), z))

    def resolvent_solve(self, A: SelfAdjointOperator, phi: np.ndarray, z: complex) -> complex:
        """⟨φ, (A - z)^{-1} φ⟩ прямым решением линейной системы."""
        _check_off_axis(z)
        matrix = A.to_dense() - z * np.eye(A.size)
        return complex(phi @ np.linalg.solve(matrix, phi.astype(complex)))

    def rank_one_perturb(self, H: SelfAdjointOperator, phi: np.ndarray, lam: float) -> SelfAdjointOperator:
        """A_λ = H + λ⟨φ, ·⟩φ; для φ = δ_j оператор остается трехдиагональным."""
        if lam == 0:
            return H
        phi = np.asarray(phi, dtype=float)
        support = np.flatnonzero(phi)
        if isinstance(H, FiniteHamiltonian) and len(support) == 1 and abs(phi[support[0]]) == 1.0:
            diagonal = H.diagonal.copy()
            diagonal[support[0]] += lam
            return FiniteHamiltonian(L=H.L, diagonal=diagonal)
        return DenseOperator(L=H.L, matrix=H.to_dense() + lam * np.outer(phi, phi))

    def aronszajn_krein_check(
        self, H: SelfAdjointOperator, phi: np.ndarray, lam: float, z: complex
    ) -> float:
        """|F_λ(z) - F(z)/(1 + λF(z))|, F_λ по собственной системе возмущенного оператора."""
        _check_off_axis(z)
        phi = np.asarray(phi, dtype=float)
        F = self._transform(spectra_service.diagonalize(H), phi, z)
        F_lam = self._transform(spectra_service.diagonalize(self.rank_one_perturb(H, phi, lam)), phi, z)
        return abs(F_lam - F / (1.0 + lam * F))

    def aronszajn_krein_grid(
        self,
        H: SelfAdjointOperator,
        phi: np.ndarray,
        lambdas: Sequence[float],
        re_z: Sequence[float],
        im_z: Sequence[float],
    ) -> float:
        """Наибольший дефект формулы Ароншайна-Крейна на сетке (λ, Re z, Im z)."""
        phi = np.asarray(phi, dtype=float)
        base = spectra_service.diagonalize(H)
        points = [complex(x, y) for x in re_z for y in im_z]
        for z in points:
            _check_off_axis(z)
        worst = 0.0
        with run_metrics.track("aronszajn_krein_grid"):
            for lam in lambdas:
                perturbed = spectra_service.diagonalize(self.rank_one_perturb(H, phi, lam))
                for z in points:
                    F = self._transform(base, phi, z)
                    F_lam = self._transform(perturbed, phi, z)
                    worst = max(worst, abs(F_lam - F / (1.0 + lam * F)))
        return worst

    def mobius_cross_ratio_defect(
        self, H: SelfAdjointOperator, phi: np.ndarray, z: complex, lambdas: Sequence[float]
    ) -> float:
        """λ -> F_λ(z) — дробно-линейное отображение и сохраняет двойное отношение четырех точек."""
        if len(lambdas) != 4:
            raise ValueError("нужно ровно четыре значения λ")
        phi = np.asarray(phi, dtype=float)
        values = [
            self._transform(spectra_service.diagonalize(self.rank_one_perturb(H, phi, lam)), phi, z)
            for lam in lambdas
        ]
        return abs(_cross_ratio(*values) - _cross_ratio(*[complex(lam) for lam in lambdas]))

    def herglotz_survey(self, size: int, samples: int, seed: int) -> int:
        """Число нарушений знака Im F = знак Im z на случайных (H, φ, z)."""
        L = (size - 1) // 2
        violations = 0
        for sample in range(samples):
            rng = stream(seed, sample)
            H = FiniteHamiltonian(L=L, diagonal=rng.uniform(-2.0, 2.0, 2 * L + 1))
            phi = rng.normal(size=2 * L + 1)
            phi /= np.linalg.norm(phi)
            z = complex(rng.uniform(-5.0, 5.0), rng.choice([-1.0, 1.0]) * rng.uniform(1e-3, 5.0))
            F = self._transform(spectra_service.diagonalize(H), phi, z)
            if (F.imag > 0) != (z.imag > 0):
                violations += 1
        return violations

    def spectral_average_check(
        self,
        H: SelfAdjointOperator,
        phi: np.ndarray,
        z: complex,
        lambda_max: float = LAMBDA_MAX,
        quad_points: int = QUAD_LIMIT,
    ) -> SpectralAverageResult:
        """∫ h_z(λ) dλ с h_z(λ) = F_λ(z) - F_λ(-i); точное значение 2πi при Im z > 0 и 0 при Im z < 0.

        На [-Λ, Λ] интеграл считается адаптивной квадратурой по прямым решениям
        резольвенты; хвост вне [-Λ, Λ] берется в замкнутой форме из
        F_λ(z) = 1/(λ + a), a = 1/F(z).

        Args:
            H: Самосопряженный оператор.
            phi: Единичный вектор.
            z: Точка вне вещественной оси, z ≠ -i.
            lambda_max: Граница Λ.
            quad_points: Предел числа подынтервалов адаптивной квадратуры.

        Returns:
            Интеграл, цель, дефект и вклад хвоста.

        Raises:
            TailBudgetError: Если хвост больше TAIL_TOLERANCE.
        """
        _check_off_axis(z)
        if z == -1j:
            raise ValueError("при z = -i подынтегральная функция тождественно равна нулю")
        phi = np.asarray(phi, dtype=float)
        a = 1.0 / self.borel_transform(H, phi, z).F
        b = 1.0 / self.borel_transform(H, phi, -1j).F

        tail = (
            cmath.log(lambda_max + b) - cmath.log(lambda_max + a)
            + cmath.log(lambda_max - a) - cmath.log(lambda_max - b)
        )
        if abs(tail) > TAIL_TOLERANCE:
            raise TailBudgetError(
                f"хвост интеграла {abs(tail):.3g} превышает {TAIL_TOLERANCE}; увеличьте lambda_max"
            )

        def h(lam: float) -> complex:
            A = self.rank_one_perturb(H, phi, lam)
            return self.resolvent_solve(A, phi, z) - self.resolvent_solve(A, phi, -1j)

        poles = sorted({-a.real, -b.real})
        breakpoints = [p for p in poles if -lambda_max < p < lambda_max]
        options = dict(limit=quad_points, points=breakpoints or None, epsabs=1e-11, epsrel=1e-11)
        with run_metrics.track("spectral_average_check"):
            real, real_err = integrate.quad(lambda lam: h(lam).real, -lambda_max, lambda_max, **options)
            imag, imag_err = integrate.quad(lambda lam: h(lam).imag, -lambda_max, lambda_max, **options)

        integral = complex(real, imag) + tail
        target = 2j * math.pi if complex(z).imag > 0 else 0j
        defect = abs(integral - target)
        logger.info(
            f"Спектральное усреднение z = {z}: интеграл {integral:.10f}, цель {target}, дефект {defect:.3e}"
        )
        return SpectralAverageResult(
            integral=integral, target=target, defect=defect, tail=tail,
            quadrature_error=math.hypot(real_err, imag_err),
        )


# Создаем экземпляр сервиса
rank_one_service = RankOneService()
