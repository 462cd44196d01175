import hashlib
import json
import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from constants.defaults import (
    FURSTENBERG_GRID, FURSTENBERG_MAX_ITER, FURSTENBERG_TOL, KS_ASSEMBLY_N, KS_E_POINTS,
    KS_GRID_N, KS_GRID_X, KS_REFINE_N, KS_REFINE_X, LAMBDA_MAX, QUAD_LIMIT
)
from models.schemas import SiteDistribution


class Section(BaseModel):
    """Базовая секция конфигурации: неизвестные ключи запрещены."""
    model_config = ConfigDict(extra="forbid")


class DistributionSection(Section):
    """Одноузельное распределение ν."""
    kind: Literal["atoms", "uniform", "piecewise", "bernoulli"] = "uniform"
    atoms: Optional[List[Tuple[float, float]]] = None  # [[значение, вес], ...]
    support: Optional[Tuple[float, float]] = None  # [a, b] для uniform и bernoulli
    edges: Optional[List[float]] = None  # разбиение для piecewise
    values: Optional[List[float]] = None  # плотность на кусках для piecewise
    p: float = Field(default=0.5, gt=0.0, lt=1.0)  # вероятность атома b для bernoulli

    @model_validator(mode="after")
    def check_fields(self) -> "DistributionSection":
        if self.kind == "atoms" and not self.atoms:
            raise ValueError("для kind = atoms нужен список atoms")
        if self.kind == "piecewise" and (not self.edges or not self.values):
            raise ValueError("для kind = piecewise нужны edges и values")
        if self.support is not None and not self.support[0] < self.support[1]:
            raise ValueError("support должен быть отрезком [a, b] с a < b")
        return self

    def build(self) -> SiteDistribution:
        """Строит SiteDistribution; ошибки нормировки всплывают как ValidationError."""
        a, b = self.support or (0.0, 1.0)
        if self.kind == "atoms":
            return SiteDistribution.atomic(list(self.atoms))
        if self.kind == "bernoulli":
            return SiteDistribution.bernoulli(a, b, self.p)
        if self.kind == "piecewise":
            return SiteDistribution.piecewise(list(self.edges), list(self.values))
        return SiteDistribution.uniform(a, b)


class LyapunovSection(Section):
    energy_grid: str = "-3:4:0.25"  # a:b:step, правый конец включается
    steps: int = Field(default=10 ** 4, ge=1, le=10 ** 7)
    realizations: int = Field(default=64, ge=1, le=10 ** 5)

    @field_validator("energy_grid")
    @classmethod
    def check_grid(cls, value: str) -> str:
        parts = value.split(":")
        if len(parts) != 3:
            raise ValueError("сетка энергий задается как a:b:step")
        start, stop, step = (float(p) for p in parts)
        if step <= 0 or stop < start:
            raise ValueError("нужны step > 0 и b ≥ a")
        return value

    def energies(self) -> np.ndarray:
        start, stop, step = (float(p) for p in self.energy_grid.split(":"))
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return start + step * np.arange(count)


class FurstenbergSection(Section):
    matrices: Literal["anderson", "rotation", "diagonal_pair", "diagonal_flip"] = "anderson"
    energy: float = 0.0
    alpha: float = Field(default=math.sqrt(2.0), gt=0.0)  # угол поворота для rotation
    grid: int = Field(default=FURSTENBERG_GRID, ge=64, le=2 ** 16)
    tol: float = Field(default=FURSTENBERG_TOL, gt=0.0, lt=1.0)
    max_iter: int = Field(default=FURSTENBERG_MAX_ITER, ge=1)
    concentration_steps: int = Field(default=1000, ge=1)
    trials: int = Field(default=16, ge=1)


class SpectrumSection(Section):
    L: int = Field(default=100, ge=1, le=5000)
    realizations: int = Field(default=100, ge=1)


class DynlocalSection(Section):
    L: int = Field(default=10, ge=1, le=2000)
    m_max: int = Field(default=6, ge=0)
    realizations: int = Field(default=1000, ge=1)

    @model_validator(mode="after")
    def check_m_max(self) -> "DynlocalSection":
        if self.m_max > self.L:
            raise ValueError(f"m_max = {self.m_max} больше L = {self.L}")
        return self


class SpectralAvgSection(Section):
    size: int = Field(default=21, ge=1, le=401)
    z: Tuple[float, float] = (0.5, 1.0)  # (Re z, Im z)
    lambda_max: float = Field(default=LAMBDA_MAX, gt=0.0)
    quad_points: int = Field(default=QUAD_LIMIT, ge=50)
    site: int = 0  # φ = δ_site

    @model_validator(mode="after")
    def check_instance(self) -> "SpectralAvgSection":
        if self.size % 2 == 0:
            raise ValueError("size должен быть нечетным (2L + 1)")
        if abs(self.site) > (self.size - 1) // 2:
            raise ValueError(f"узел {self.site} вне окна размера {self.size}")
        if self.z[1] == 0.0:
            raise ValueError("Im z не может быть нулем")
        if self.z == (0.0, -1.0):
            raise ValueError("z = -i исключено: подынтегральная функция тождественно ноль")
        return self


class KsSection(Section):
    L: int = Field(default=6, ge=1, le=64)
    m_max: int = Field(default=4, ge=1)
    grid_n: int = Field(default=KS_GRID_N, ge=16, le=2 ** 20)
    grid_x: float = Field(default=KS_GRID_X, gt=0.0)
    e_points: int = Field(default=KS_E_POINTS, ge=3)
    assembly_n: int = Field(default=KS_ASSEMBLY_N, ge=16)
    refine_x: float = Field(default=KS_REFINE_X, ge=1.0)
    refine_n: int = Field(default=KS_REFINE_N, ge=2)
    mc_realizations: int = Field(default=10 ** 4, ge=0)  # 0: без сравнения с Монте-Карло
    certify: bool = True
    jacobian_L: List[int] = Field(default_factory=lambda: [1, 2, 3])
    jacobian_instances: int = Field(default=20, ge=0)

    @model_validator(mode="after")
    def check_grid(self) -> "KsSection":
        if self.grid_n % 2:
            raise ValueError("grid_n должен быть четным")
        if self.m_max > self.L:
            raise ValueError(f"m_max = {self.m_max} больше L = {self.L}")
        if any(L < 1 for L in self.jacobian_L):
            raise ValueError("jacobian_L должны быть положительными")
        return self


class CheckSection(Section):
    """Размеры проверок инвариантов."""
    L_max: int = Field(default=20, ge=1)
    containment_realizations: int = Field(default=1000, ge=1)
    coverage_L: int = Field(default=50, ge=1)
    coverage_realizations: int = Field(default=10 ** 4, ge=1)
    coverage_gap: float = Field(default=0.1, gt=0.0)
    coverage_edge: float = Field(default=0.5, ge=0.0)  # зона хвостов Лифшица у краев Σ
    product_steps: int = Field(default=10 ** 4, ge=1)
    kingman_samples: int = Field(default=100, ge=1)
    herglotz_samples: int = Field(default=1000, ge=1)
    interlacing_realizations: int = Field(default=10, ge=1)
    ks_grid_n: int = Field(default=4096, ge=16)
    ks_grid_x: float = Field(default=16.0, gt=2.0)
    jacobian_instances: int = Field(default=20, ge=1)
    route_L: int = Field(default=3, ge=1)
    route_realizations: int = Field(default=2000, ge=2)
    route_e_points: int = Field(default=33, ge=3)

    @field_validator("ks_grid_n")
    @classmethod
    def check_even(cls, value: int) -> int:
        if value % 2:
            raise ValueError("ks_grid_n должен быть четным")
        return value


class OutputSection(Section):
    directory: str = "results"


class ExperimentConfig(Section):
    """Полная конфигурация эксперимента: по секции на модуль."""
    seed: int = Field(default=0, ge=0, lt=2 ** 63)
    workers: Optional[int] = Field(default=None, ge=1)  # None: LOCLAB_WORKERS
    distribution: DistributionSection = Field(default_factory=DistributionSection)
    lyapunov: LyapunovSection = Field(default_factory=LyapunovSection)
    furstenberg: FurstenbergSection = Field(default_factory=FurstenbergSection)
    spectrum: SpectrumSection = Field(default_factory=SpectrumSection)
    dynlocal: DynlocalSection = Field(default_factory=DynlocalSection)
    spectral_avg: SpectralAvgSection = Field(default_factory=SpectralAvgSection)
    ks: KsSection = Field(default_factory=KsSection)
    check: CheckSection = Field(default_factory=CheckSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def canonical_json(self) -> str:
        """Канонический JSON без полей, не влияющих на результаты (потоки и каталог вывода)."""
        data = self.model_dump(mode="json", exclude={"workers", "output"})
        return json.dumps(data, sort_keys=True, separators=(",", ":"))

    def config_hash(self) -> str:
        """SHA-256 канонического JSON проверенной конфигурации."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()

    def with_overrides(self, section: str, **values) -> "ExperimentConfig":
        """Копия с переопределенными полями секции (значения None пропускаются), с повторной проверкой."""
        data = self.model_dump()
        provided = {key: value for key, value in values.items() if value is not None}
        if section:
            data[section].update(provided)
        else:
            data.update(provided)
        return ExperimentConfig.model_validate(data)
