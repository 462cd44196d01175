import math
from enum import Enum
from functools import cached_property
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from constants.defaults import NORMALIZATION_TOL, SL2_DET_TOL, SUPPORT_MERGE_TOL
from utils.errors import DistributionError, WindowError


def merge_intervals(
    intervals: List[Tuple[float, float]], tol: float = SUPPORT_MERGE_TOL
) -> List[Tuple[float, float]]:
    """Объединяет пересекающиеся отрезки в минимальный набор непересекающихся."""
    merged: List[Tuple[float, float]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1] + tol:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


class DistributionKind(str, Enum):
    """Тип одноузельного распределения."""
    ATOMIC = "atomic"
    DENSITY = "density"


class SiteDistribution(BaseModel):
    """Одноузельное распределение ν: конечный набор атомов или кусочно-постоянная плотность r."""
    model_config = ConfigDict(frozen=True)

    kind: DistributionKind
    atoms: List[Tuple[float, float]] = Field(default_factory=list)  # (значение, вес)
    edges: List[float] = Field(default_factory=list)  # разбиение носителя плотности
    values: List[float] = Field(default_factory=list)  # значение плотности на каждом куске

    @model_validator(mode="after")
    def check_normalized(self) -> "SiteDistribution":
        """Проверяет нормировку и компактность носителя."""
        if self.kind == DistributionKind.ATOMIC:
            if not self.atoms:
                raise DistributionError("атомарное распределение без атомов")
            weights = np.array([w for _, w in self.atoms])
            points = np.array([x for x, _ in self.atoms])
            if not np.all(np.isfinite(points)):
                raise DistributionError("атомы должны быть конечными")
            if np.any(weights < 0):
                raise DistributionError("отрицательный вес атома")
            total = float(weights.sum())
        else:
            if len(self.edges) != len(self.values) + 1 or not self.values:
                raise DistributionError("число границ должно быть на единицу больше числа кусков")
            edges = np.array(self.edges)
            if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
                raise DistributionError("границы кусков должны быть конечными и возрастать")
            if np.any(np.array(self.values) < 0):
                raise DistributionError("плотность должна быть неотрицательной")
            total = float(np.sum(np.array(self.values) * np.diff(edges)))
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise DistributionError(f"распределение не нормировано: полная масса {total!r}")
        return self

    @classmethod
    def atomic(cls, atoms: List[Tuple[float, float]]) -> "SiteDistribution":
        return cls(kind=DistributionKind.ATOMIC, atoms=[(float(x), float(w)) for x, w in atoms])

    @classmethod
    def bernoulli(cls, a: float = 0.0, b: float = 1.0, p: float = 0.5) -> "SiteDistribution":
        """Бернулли: a с вероятностью 1 - p, b с вероятностью p."""
        return cls.atomic([(a, 1.0 - p), (b, p)])

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "SiteDistribution":
        return cls.piecewise([a, b], [1.0 / (b - a)])

    @classmethod
    def piecewise(cls, edges: List[float], values: List[float]) -> "SiteDistribution":
        return cls(kind=DistributionKind.DENSITY, edges=[float(e) for e in edges],
                   values=[float(v) for v in values])

    @property
    def is_atomic(self) -> bool:
        return self.kind == DistributionKind.ATOMIC

    @cached_property
    def atom_table(self) -> Tuple[np.ndarray, np.ndarray]:
        order = sorted(self.atoms)
        points = np.array([x for x, _ in order])
        cum = np.cumsum([w for _, w in order])
        return points, cum

    @cached_property
    def piece_table(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        edges = np.array(self.edges)
        values = np.array(self.values)
        cum = np.concatenate([[0.0], np.cumsum(values * np.diff(edges))])
        return edges, values, cum

    @cached_property
    def support_intervals(self) -> List[Tuple[float, float]]:
        """Носитель ν как минимальное объединение отрезков (атом — вырожденный отрезок)."""
        if self.is_atomic:
            return merge_intervals([(x, x) for x, w in self.atoms if w > 0])
        pieces = [
            (self.edges[j], self.edges[j + 1]) for j, v in enumerate(self.values) if v > 0
        ]
        return merge_intervals(pieces)

    @property
    def support_radius(self) -> float:
        """M = max { |E| : E ∈ supp ν }."""
        return max(max(abs(lo), abs(hi)) for lo, hi in self.support_intervals)

    @property
    def r_max(self) -> float:
        """Верхняя граница плотности ‖r‖_∞."""
        if self.is_atomic:
            raise DistributionError("у атомарного распределения нет ограниченной плотности")
        return max(self.values)

    def mean(self) -> float:
        if self.is_atomic:
            return float(sum(x * w for x, w in self.atoms))
        edges, values, _ = self.piece_table
        return float(np.sum(values * (edges[1:] ** 2 - edges[:-1] ** 2)) / 2.0)

    def variance(self) -> float:
        if self.is_atomic:
            second = sum(x * x * w for x, w in self.atoms)
        else:
            edges, values, _ = self.piece_table
            second = float(np.sum(values * (edges[1:] ** 3 - edges[:-1] ** 3)) / 3.0)
        return float(second - self.mean() ** 2)

    def contains(self, x: Union[float, np.ndarray], tol: float = SUPPORT_MERGE_TOL) -> np.ndarray:
        """Принадлежность точек носителю."""
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.support_intervals:
            inside |= (x >= lo - tol) & (x <= hi + tol)
        return inside

    def cdf(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """Функция распределения F(x) = ν((-∞, x])."""
        x = np.asarray(x, dtype=float)
        if self.is_atomic:
            points, cum = self.atom_table
            table = np.concatenate([[0.0], cum])
            return table[np.searchsorted(points, x, side="right")]
        edges, values, cum = self.piece_table
        j = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(values) - 1)
        inner = cum[j] + values[j] * (np.clip(x, edges[j], edges[j + 1]) - edges[j])
        return np.where(x >= edges[-1], 1.0, np.where(x < edges[0], 0.0, inner))

    def cdf_integral(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """G(x) = ∫_{-∞}^x F(s) ds для плотности (кусочно-квадратичная, G'' = r)."""
        if self.is_atomic:
            raise DistributionError("интеграл функции распределения нужен только для плотности")
        x = np.asarray(x, dtype=float)
        edges, values, cum = self.piece_table
        widths = np.diff(edges)
        at_edges = np.concatenate([[0.0], np.cumsum(cum[:-1] * widths + 0.5 * values * widths ** 2)])
        j = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(values) - 1)
        offset = np.clip(x, edges[j], edges[j + 1]) - edges[j]
        inner = at_edges[j] + cum[j] * offset + 0.5 * values[j] * offset ** 2
        beyond = at_edges[-1] + (x - edges[-1])
        return np.where(x >= edges[-1], beyond, np.where(x < edges[0], 0.0, inner))

    def quantile(self, u: Union[float, np.ndarray]) -> np.ndarray:
        """Обратная функция распределения; точное обращение для обоих типов."""
        u = np.asarray(u, dtype=float)
        if self.is_atomic:
            points, cum = self.atom_table
            idx = np.minimum(np.searchsorted(cum, u, side="right"), len(points) - 1)
            return points[idx]
        edges, values, cum = self.piece_table
        j = np.minimum(np.searchsorted(cum[1:], u, side="right"), len(values) - 1)
        slope = np.where(values[j] > 0, values[j], 1.0)
        x = np.where(values[j] > 0, edges[j] + (u - cum[j]) / slope, edges[j])
        return np.clip(x, edges[j], edges[j + 1])

    def density(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """Плотность r(x)."""
        if self.is_atomic:
            raise DistributionError("у атомарного распределения нет плотности")
        x = np.asarray(x, dtype=float)
        edges, values, _ = self.piece_table
        j = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, len(values) - 1)
        return np.where((x >= edges[0]) & (x < edges[-1]), values[j], 0.0)


class IntervalUnion(BaseModel):
    """Минимальное объединение непересекающихся замкнутых отрезков."""
    model_config = ConfigDict(frozen=True)

    intervals: List[Tuple[float, float]]

    @property
    def lower(self) -> float:
        return self.intervals[0][0]

    @property
    def upper(self) -> float:
        return self.intervals[-1][1]

    def measure(self) -> float:
        return float(sum(hi - lo for lo, hi in self.intervals))

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return any(lo - tol <= x <= hi + tol for lo, hi in self.intervals)


class PotentialPath(BaseModel):
    """Отрезок траектории потенциала V_ω(n) = ω_n на окне [n_lo, n_hi]."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n_lo: int
    n_hi: int
    values: np.ndarray
    seed: int
    realization_index: int

    @model_validator(mode="after")
    def check_window(self) -> "PotentialPath":
        if self.n_hi < self.n_lo:
            raise WindowError(f"пустое окно [{self.n_lo}, {self.n_hi}]")
        if self.values.shape != (self.n_hi - self.n_lo + 1,):
            raise WindowError("число значений не совпадает с длиной окна")
        return self

    @property
    def window(self) -> Tuple[int, int]:
        return self.n_lo, self.n_hi

    def sites(self, first: int, last: int) -> np.ndarray:
        """Значения на узлах first..last включительно."""
        if first < self.n_lo or last > self.n_hi:
            raise WindowError(
                f"узлы [{first}, {last}] вне окна [{self.n_lo}, {self.n_hi}]"
            )
        return self.values[first - self.n_lo:last - self.n_lo + 1]

    def shift(self, k: int) -> "PotentialPath":
        """Сдвиг T^k: (T^k ω)_n = ω_{n+k}, только переиндексация."""
        return self.model_copy(update={"n_lo": self.n_lo - k, "n_hi": self.n_hi - k})

    def reflect(self) -> "PotentialPath":
        """Отражение n -> -n (для поведения левее нуля)."""
        return self.model_copy(
            update={"n_lo": -self.n_hi, "n_hi": -self.n_lo, "values": self.values[::-1].copy()}
        )


class FiniteHamiltonian(BaseModel):
    """Сужение H_ω^{(L)} на ℓ²(-L..L): диагональ — потенциал, внедиагональные элементы 1."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    L: int = Field(ge=0)
    diagonal: np.ndarray

    @model_validator(mode="after")
    def check_size(self) -> "FiniteHamiltonian":
        if self.diagonal.shape != (2 * self.L + 1,):
            raise WindowError(f"диагональ должна иметь длину {2 * self.L + 1}")
        return self

    @property
    def size(self) -> int:
        return 2 * self.L + 1

    @property
    def off_diagonal(self) -> np.ndarray:
        return np.ones(self.size - 1)

    def site_index(self, m: int) -> int:
        if abs(m) > self.L:
            raise WindowError(f"узел {m} вне окна [-{self.L}, {self.L}]")
        return m + self.L

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diagonal) + np.diag(self.off_diagonal, 1) + np.diag(self.off_diagonal, -1)


class DenseOperator(BaseModel):
    """Самосопряженный оператор на ℓ²(-L..L) в плотной форме (после ранг-один возмущения)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    L: int = Field(ge=0)
    matrix: np.ndarray

    @model_validator(mode="after")
    def check_symmetric(self) -> "DenseOperator":
        n = 2 * self.L + 1
        if self.matrix.shape != (n, n):
            raise WindowError(f"матрица должна иметь размер {n}x{n}")
        if not np.allclose(self.matrix, self.matrix.T, rtol=0.0, atol=1e-12):
            raise ValueError("оператор должен быть симметричным")
        return self

    @property
    def size(self) -> int:
        return 2 * self.L + 1

    def site_index(self, m: int) -> int:
        if abs(m) > self.L:
            raise WindowError(f"узел {m} вне окна [-{self.L}, {self.L}]")
        return m + self.L

    def to_dense(self) -> np.ndarray:
        return self.matrix


SelfAdjointOperator = Union[FiniteHamiltonian, DenseOperator]


class Sl2(BaseModel):
    """Элемент SL(2,R): [[a, b], [c, d]]."""
    model_config = ConfigDict(frozen=True)

    a: float
    b: float
    c: float
    d: float

    @model_validator(mode="after")
    def check_unimodular(self) -> "Sl2":
        if abs(self.a * self.d - self.b * self.c - 1.0) > SL2_DET_TOL:
            raise ValueError(f"определитель {self.a * self.d - self.b * self.c!r} не равен 1")
        return self

    @classmethod
    def from_array(cls, m: np.ndarray) -> "Sl2":
        return cls(a=float(m[0, 0]), b=float(m[0, 1]), c=float(m[1, 0]), d=float(m[1, 1]))

    def as_array(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def inverse(self) -> "Sl2":
        return Sl2(a=self.d, b=-self.b, c=-self.c, d=self.a)

    def __matmul__(self, other: "Sl2") -> "Sl2":
        return Sl2.from_array(self.as_array() @ other.as_array())


class ScaledProduct(BaseModel):
    """Произведение коцикла: нормированная матрица (max|элемент| = 1) и накопленный log-масштаб."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrix: np.ndarray
    log_scale: float
    steps: int = Field(ge=0)

    @field_validator("log_scale")
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("log_scale должен быть конечным")
        return value

    def singular_values_log(self) -> Tuple[float, float]:
        """(log σ_max, log σ_min) истинного произведения; σ_min = 1/σ_max в SL(2,R)."""
        m = self.matrix
        s = float(np.sum(m * m))
        det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        top = math.sqrt((s + math.sqrt(max(s * s - 4.0 * det * det, 0.0))) / 2.0)
        log_top = self.log_scale + math.log(top)
        return log_top, -log_top

    def log_norm(self) -> float:
        """log ‖M‖ (операторная 2-норма)."""
        return self.singular_values_log()[0]

    def determinant(self) -> float:
        """Восстановленный определитель exp(2·log_scale)·det(matrix).

        Осмысленен, пока произведение не слишком плохо обусловлено: при ‖M‖² ~ 1/ε
        разность ad - bc нормированной матрицы теряет все значащие цифры.
        """
        m = self.matrix
        det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
        return math.exp(2.0 * self.log_scale) * det

    def to_array(self) -> np.ndarray:
        """Полное произведение; переполняется при больших log_scale."""
        return math.exp(self.log_scale) * self.matrix


class LyapunovEstimate(BaseModel):
    """Оценка показателя Ляпунова γ(E) по нескольким реализациям."""
    energy: float
    gamma_hat: float
    stderr: float = Field(ge=0.0)
    steps: int
    realizations: int


class ProjectivePoint(BaseModel):
    """Точка P¹: направление (cos θ, sin θ), отождествленное с противоположным."""
    theta: float = Field(ge=0.0, lt=math.pi)

    @classmethod
    def from_angle(cls, angle: float) -> "ProjectivePoint":
        reduced = math.fmod(angle, math.pi)
        if reduced < 0:
            reduced += math.pi
        if reduced >= math.pi:
            reduced = 0.0
        return cls(theta=reduced)

    def vector(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)])

    def distance(self, other: "ProjectivePoint") -> float:
        """Расстояние на P¹ (по модулю π)."""
        diff = abs(self.theta - other.theta)
        return min(diff, math.pi - diff)


class OseledecDirection(ProjectivePoint):
    """Наиболее сжимаемое направление θ_n произведения и признак сходимости."""
    converged: bool
    log_norm: float


class ProjectiveMeasure(BaseModel):
    """Дискретная вероятностная мера на P¹: веса в центрах θ_j = (j + ½)π/G."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid_size: int = Field(ge=1)
    weights: np.ndarray

    @model_validator(mode="after")
    def check_probability(self) -> "ProjectiveMeasure":
        if self.weights.shape != (self.grid_size,):
            raise ValueError("число весов не совпадает с размером сетки")
        if np.any(self.weights < 0):
            raise ValueError("веса меры должны быть неотрицательными")
        if abs(float(self.weights.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError("мера не нормирована")
        return self

    @classmethod
    def uniform(cls, grid_size: int) -> "ProjectiveMeasure":
        return cls(grid_size=grid_size, weights=np.full(grid_size, 1.0 / grid_size))

    def centers(self) -> np.ndarray:
        return (np.arange(self.grid_size) + 0.5) * math.pi / self.grid_size

    def max_bin_weight(self) -> float:
        return float(self.weights.max())

    def circular_variance(self) -> float:
        """1 - |Σ m_j e^{2iθ_j}|: ноль для дираковской меры."""
        return float(1.0 - abs(np.sum(self.weights * np.exp(2j * self.centers()))))


class InvariantMeasure(ProjectiveMeasure):
    """Результат итерации m -> ν * m вместе с невязкой."""
    residual: float
    iterations: int
    converged: bool


class MatrixDistribution(BaseModel):
    """Конечно-носимое распределение на SL(2,R): матрицы (K, 2, 2) и веса (K,)."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    matrices: np.ndarray
    weights: np.ndarray

    @model_validator(mode="after")
    def check_support(self) -> "MatrixDistribution":
        k = self.weights.shape[0]
        if self.matrices.shape != (k, 2, 2) or k == 0:
            raise ValueError("ожидается массив матриц формы (K, 2, 2)")
        if np.any(self.weights < 0) or abs(float(self.weights.sum()) - 1.0) > NORMALIZATION_TOL:
            raise ValueError("веса должны быть неотрицательными и давать в сумме 1")
        if not np.all(np.isfinite(self.matrices)):
            raise ValueError("матрицы должны быть конечными")
        dets = np.linalg.det(self.matrices)
        if np.any(np.abs(dets - 1.0) > SL2_DET_TOL):
            raise ValueError("все матрицы носителя должны иметь определитель 1")
        return self

    @classmethod
    def from_list(cls, support: List[Tuple[Sl2, float]]) -> "MatrixDistribution":
        return cls(
            matrices=np.array([m.as_array() for m, _ in support]),
            weights=np.array([w for _, w in support], dtype=float),
        )

    @property
    def size(self) -> int:
        return int(self.weights.shape[0])

    def extend(self, extra: List[Tuple[Sl2, float]]) -> "MatrixDistribution":
        """Добавляет матрицы малого веса, перенормируя старые веса."""
        added = sum(w for _, w in extra)
        return MatrixDistribution(
            matrices=np.concatenate([self.matrices, np.array([m.as_array() for m, _ in extra])]),
            weights=np.concatenate([self.weights * (1.0 - added), [w for _, w in extra]]),
        )


class EigenSystem(BaseModel):
    """Собственные значения (по возрастанию) и ортонормированные собственные векторы-столбцы."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    L: int = Field(ge=0)
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def size(self) -> int:
        return 2 * self.L + 1

    def site_index(self, m: int) -> int:
        if abs(m) > self.L:
            raise WindowError(f"узел {m} вне окна [-{self.L}, {self.L}]")
        return m + self.L

    def site_row(self, m: int) -> np.ndarray:
        """φ_k(m) для всех k."""
        return self.eigenvectors[self.site_index(m), :]


class DecayFit(BaseModel):
    """Экспоненциальный профиль |ψ(n)| ≈ C e^{-γ|n - n_k|}."""
    center: int
    rate: float
    prefactor: float
    r_squared: float
    rate_stderr: float
    sites_used: int

    @field_validator("rate")
    @classmethod
    def check_finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("скорость убывания должна быть конечной")
        return value


class CensusRow(BaseModel):
    """Строка переписи локализации: одна собственная функция одной реализации."""
    realization: int
    k: int
    energy: float
    rate: float
    center: int
    r_squared: float
    ipr: float


class CensusSummary(BaseModel):
    """Сводка переписи: квантили скоростей и доля локализованных векторов."""
    L: int
    realizations: int
    eigenvectors: int
    rate_quantiles: List[Tuple[float, float]]
    fraction_localized: float
    r2_threshold: float
    rate_threshold: float


class CorrelatorKind(str, Enum):
    """Вид оценки коррелятора."""
    RHO_BOUND = "rho_bound"
    SUP_SAMPLED = "sup_sampled"


class CorrelatorEstimate(BaseModel):
    """Монте-Карло оценка a_L(m, n) или ρ_L(m, n)."""
    m: int
    n: int
    value: float = Field(ge=-1e-12, le=1.0 + 1e-9)
    kind: CorrelatorKind
    realizations: int
    stderr: float = Field(ge=0.0)


class CorrelatorProfileRow(BaseModel):
    """Строка профиля коррелятора по m при n = 0."""
    m: int
    rho_mean: float
    rho_stderr: float
    sup_sampled_mean: float
    sup_sampled_stderr: float
    max_domination_defect: float


class DecayRateFit(BaseModel):
    """Подгонка log(value) = log C - γ m."""
    prefactor: float
    rate: float
    rate_stderr: float
    r_squared: float
    localized: bool


class HerglotzSample(BaseModel):
    """Значение функции Герглотца F(z) = ⟨φ, (A - z)^{-1} φ⟩."""
    z: complex
    F: complex

    @model_validator(mode="after")
    def check_sign(self) -> "HerglotzSample":
        if self.z.imag == 0:
            raise ValueError("z должно лежать вне вещественной оси")
        if self.F.imag != 0 and (self.F.imag > 0) != (self.z.imag > 0):
            raise ValueError("нарушено свойство Герглотца: знаки Im F и Im z различны")
        return self


class SpectralAverageResult(BaseModel):
    """Численный интеграл ∫ h_z(λ) dλ и его точное значение (2πi или 0)."""
    integral: complex
    target: complex
    defect: float
    tail: complex
    quadrature_error: float


class RealGrid(BaseModel):
    """Равномерная сетка средних точек x_j = -X + (j + ½)h на [-X, X]."""
    model_config = ConfigDict(frozen=True)

    half_width: float = Field(gt=0.0)
    points: int = Field(ge=2)

    @field_validator("points")
    @classmethod
    def check_even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("число узлов должно быть четным")
        return value

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points

    @cached_property
    def nodes(self) -> np.ndarray:
        return -self.half_width + (np.arange(self.points) + 0.5) * self.spacing


class GridFunction(BaseModel):
    """Вещественная функция на сетке с квадратурными нормами L¹ и L²."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    grid: RealGrid
    values: np.ndarray

    @model_validator(mode="after")
    def check_shape(self) -> "GridFunction":
        if self.values.shape != (self.grid.points,):
            raise ValueError("число значений не совпадает с сеткой")
        return self

    def l1_norm(self) -> float:
        return float(self.grid.spacing * np.sum(np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(math.sqrt(self.grid.spacing * np.sum(self.values ** 2)))

    def inner(self, other: "GridFunction") -> float:
        return float(self.grid.spacing * np.dot(self.values, other.values))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(grid=self.grid, values=values)


class NormReport(BaseModel):
    """Оценки норм операторов Кунца-Суйяра по сетке энергий в Σ0."""
    energies: List[float]
    t0_11: List[float]
    t0_12: List[float]
    t1_22: List[float]
    t1sq_22: List[float]
    sup_t0_11: float
    sup_t0_12: float
    sup_t1_22: float
    sup_t1sq_22: float
    spread_t1sq_22: float
    budget: float
    delta: float
    converged: bool

    @model_validator(mode="after")
    def check_sup(self) -> "NormReport":
        for column, sup in (
            (self.t0_11, self.sup_t0_11), (self.t0_12, self.sup_t0_12),
            (self.t1_22, self.sup_t1_22), (self.t1sq_22, self.sup_t1sq_22),
        ):
            if min(column) < 0 or max(column) != sup:
                raise ValueError("поле sup должно быть максимумом неотрицательного столбца")
        return self


class RhoOperatorResult(BaseModel):
    """ρ_L(m, 0) через произведение операторов и бюджет дискретизации."""
    L: int
    m: int
    value: float
    coarse_value: float
    budget: float


class RouteComparison(BaseModel):
    """ρ_L(m, 0) через операторы против Монте-Карло."""
    L: int
    m: int
    rho_operator: float
    rho_mc: float
    stderr: float = Field(ge=0.0)
    budget: float = Field(ge=0.0)
    discrepancy: float
    agrees: bool

    @classmethod
    def compare(cls, operator: RhoOperatorResult, mc_value: float, stderr: float) -> "RouteComparison":
        """Согласие в пределах 3·(stderr + budget)."""
        discrepancy = abs(operator.value - mc_value)
        return cls(
            L=operator.L, m=operator.m, rho_operator=operator.value, rho_mc=mc_value,
            stderr=stderr, budget=operator.budget, discrepancy=discrepancy,
            agrees=discrepancy <= 3.0 * (stderr + operator.budget),
        )


class DecayBound(BaseModel):
    """ρ_L(m, 0) против оценки sup‖T1²‖^{(m-2)/2}·r_max·|Σ0|."""
    m: int
    value: float
    budget: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.value <= self.bound + self.budget


class JacobianCheck(BaseModel):
    """Сравнение численного якобиана замены переменных с φ_k(0)^{-2}."""
    L: int
    k: int
    det_numeric: float
    det_closed_form: float
    phi0_inverse_square: float
    relative_defect: float
    ratio_defect: float


class CheckResult(BaseModel):
    """Итог проверки одного свойства."""
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: Optional[str] = None
    skipped: bool = False


class SingularData(BaseModel):
    """Сингулярные направления 2×2 произведения (углы в [0, π))."""
    theta_top: float
    theta_bottom: float
    phi_top: float
    log_sigma_max: float


class SolutionGrowth(BaseModel):
    """Рост решения ‖M_m · v‖ по шагам m и наклон по второй половине диапазона."""
    points: List[Tuple[int, float]]
    slope: float
    expanding_component: float
    contracting_component: float


class WitnessReport(BaseModel):
    """Свидетели некомпактности группы, порожденной носителем матричного распределения."""
    first: Sl2
    second: Sl2
    first_fixes_e1: bool
    second_moves_e1: bool
    power_log_norms: List[float]


class RefinementStudy(BaseModel):
    """Значения γ на последовательности сеток и отношения последовательных разностей."""
    grids: List[int]
    gammas: List[float]
    differences: List[float]
    ratios: List[float]
