import math

import numpy as np
import pytest

from models.schemas import DenseOperator, FiniteHamiltonian
from services.model_service import model_service
from services.rank_one_service import rank_one_service
from utils.errors import ResolventError, TailBudgetError


def delta(H, site: int = 0) -> np.ndarray:
    phi = np.zeros(H.size)
    phi[H.site_index(site)] = 1.0
    return phi


@pytest.fixture
def instance(uniform_dist):
    return model_service.hamiltonian(uniform_dist, 0, 0, 10)


class TestBorelTransform:
    def test_matches_direct_solve(self, free_dist):
        H = model_service.hamiltonian(free_dist, 0, 0, 2)
        phi = delta(H)
        sample = rank_one_service.borel_transform(H, phi, 1j)
        assert abs(sample.F - rank_one_service.resolvent_solve(H, phi, 1j)) < 1e-12
        assert sample.F.imag > 0

    def test_real_axis_rejected(self, instance):
        with pytest.raises(ResolventError):
            rank_one_service.borel_transform(instance, delta(instance), 0.5)

    def test_herglotz_survey_has_no_violations(self):
        assert rank_one_service.herglotz_survey(21, 200, 3) == 0


class TestPerturbation:
    def test_site_perturbation_stays_tridiagonal(self, instance):
        perturbed = rank_one_service.rank_one_perturb(instance, delta(instance, 2), 0.7)
        assert isinstance(perturbed, FiniteHamiltonian)
        assert perturbed.diagonal[instance.site_index(2)] == pytest.approx(instance.diagonal[instance.site_index(2)] + 0.7)

    def test_general_vector_gives_dense_operator(self, instance):
        phi = np.ones(instance.size) / math.sqrt(instance.size)
        perturbed = rank_one_service.rank_one_perturb(instance, phi, 0.7)
        assert isinstance(perturbed, DenseOperator)
        assert np.allclose(perturbed.matrix - instance.to_dense(), 0.7 * np.outer(phi, phi))

    @pytest.mark.parametrize("lam", [-1.0, 0.3, 5.0])
    def test_aronszajn_krein_formula(self, instance, lam):
        assert rank_one_service.aronszajn_krein_check(instance, delta(instance), lam, 0.7 + 0.2j) < 1e-10

    def test_aronszajn_krein_for_spread_vector(self, instance):
        phi = np.linspace(1.0, 2.0, instance.size)
        phi /= np.linalg.norm(phi)
        worst = rank_one_service.aronszajn_krein_grid(instance, phi, [-2.0, 1.0, 4.0], [-1.0, 0.5, 3.0], [0.1, 1.0])
        assert worst < 1e-10

    def test_cross_ratio_preserved(self, instance):
        defect = rank_one_service.mobius_cross_ratio_defect(
            instance, delta(instance), 0.4 + 0.5j, [-1.0, 0.3, 2.0, 5.0]
        )
        assert defect < 1e-9

    def test_cross_ratio_needs_four_points(self, instance):
        with pytest.raises(ValueError):
            rank_one_service.mobius_cross_ratio_defect(instance, delta(instance), 1j, [0.0, 1.0, 2.0])


class TestSpectralAverage:
    @pytest.mark.parametrize("z, target", [(0.5 + 1.0j, 2j * math.pi), (0.5 - 1.0j, 0j)])
    def test_single_site(self, z, target):
        H = FiniteHamiltonian(L=0, diagonal=np.array([0.0]))
        result = rank_one_service.spectral_average_check(H, np.array([1.0]), z)
        assert result.target == target
        assert result.defect < 1e-6

    @pytest.mark.parametrize("z", [0.5 + 1.0j, 0.5 - 1.0j])
    def test_random_instance(self, instance, z):
        result = rank_one_service.spectral_average_check(instance, delta(instance), z)
        assert result.defect < 1e-6
        assert abs(result.tail) < 0.1

    def test_real_z_rejected(self, instance):
        with pytest.raises(ResolventError):
            rank_one_service.spectral_average_check(instance, delta(instance), 0.5 + 0j)

    def test_minus_i_rejected(self, instance):
        with pytest.raises(ValueError):
            rank_one_service.spectral_average_check(instance, delta(instance), -1j)

    def test_short_window_exceeds_tail_budget(self):
        H = FiniteHamiltonian(L=0, diagonal=np.array([0.0]))
        with pytest.raises(TailBudgetError):
            rank_one_service.spectral_average_check(H, np.array([1.0]), 0.5 + 1.0j, lambda_max=1.0)
