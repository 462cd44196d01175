import math

import numpy as np
import pytest

from models.schemas import PotentialPath, ProjectivePoint, ScaledProduct, SiteDistribution, Sl2
from services.furstenberg_service import furstenberg_service
from services.model_service import model_service
from services.transfer_service import transfer_service
from utils.errors import WindowError
from utils.rng import stream


def constant_path(n: int, value: float = 0.0) -> PotentialPath:
    return PotentialPath(n_lo=1, n_hi=n, values=np.full(n, value), seed=0, realization_index=0)


class TestProducts:
    def test_step_matrix_is_unimodular(self):
        assert transfer_service.step_matrix(0.7, -1.3).det() == pytest.approx(1.0)

    def test_non_unimodular_rejected(self):
        with pytest.raises(ValueError):
            Sl2(a=2.0, b=0.0, c=0.0, d=1.0)

    def test_short_product_matches_matrix_power(self):
        product = transfer_service.cocycle_product(3.0, constant_path(5), 5)
        A = np.array([[3.0, -1.0], [1.0, 0.0]])
        assert np.allclose(product.to_array(), np.linalg.matrix_power(A, 5))
        assert product.determinant() == pytest.approx(1.0, rel=1e-9)

    def test_constant_potential_growth(self):
        n = 1000
        product = transfer_service.cocycle_product(3.0, constant_path(n), n)
        assert abs(product.log_norm() / n - math.log((3.0 + math.sqrt(5.0)) / 2.0)) < 1e-3

    def test_leftward_product_reflects_window(self, uniform_dist):
        path = model_service.sample_path(uniform_dist, 3, 0, (-5, 5))
        product = transfer_service.leftward_product(0.4, path, 3)
        steps = [transfer_service.step_matrix(0.4, path.sites(n, n)[0]) for n in (-1, -2, -3)]
        expected = steps[2].as_array() @ steps[1].as_array() @ steps[0].as_array()
        assert np.allclose(product.to_array(), expected)

    def test_zero_steps_rejected(self):
        with pytest.raises(WindowError):
            transfer_service.cocycle_product(0.0, constant_path(3), 0)


class TestLyapunov:
    def test_constant_potential_oracle(self, free_dist):
        n = 10 ** 5
        outside, inside = [2.5, 3.0, 4.0], [0.0, 1.0, -1.5]
        estimates = transfer_service.lyapunov_scan(free_dist, outside + inside, n, 64, 0)
        for E, estimate in zip(outside, estimates[:3]):
            assert abs(estimate.gamma_hat - math.acosh(E / 2.0)) <= 3.0 * estimate.stderr + 10.0 / n
        for estimate in estimates[3:]:
            assert estimate.gamma_hat < 0.01

    @pytest.mark.parametrize("E", [2.5, 3.0, 4.0])
    def test_constant_potential_short_product(self, free_dist, E):
        n = 10 ** 4
        estimate = transfer_service.lyapunov_estimate(free_dist, E, n, 4, 0)
        assert abs(estimate.gamma_hat - math.acosh(E / 2.0)) <= 3.0 * estimate.stderr + 10.0 / n

    def test_closed_form(self):
        assert transfer_service.constant_potential_gamma(3.0) == pytest.approx(0.9624236501)
        assert transfer_service.constant_potential_gamma(1.0) == 0.0

    def test_disorder_gives_positive_exponent(self, bernoulli_dist):
        estimates = transfer_service.lyapunov_scan(bernoulli_dist, [-1.0, 0.5, 2.0], 10 ** 4, 8, 1)
        for estimate in estimates:
            assert estimate.gamma_hat > 5.0 * estimate.stderr

    def test_scan_is_deterministic(self, uniform_dist):
        first = transfer_service.lyapunov_scan(uniform_dist, [0.0, 1.0], 500, 3, 9)
        second = transfer_service.lyapunov_scan(uniform_dist, [0.0, 1.0], 500, 3, 9)
        assert [e.gamma_hat for e in first] == [e.gamma_hat for e in second]

    def test_rotation_has_zero_exponent(self):
        md = furstenberg_service.rotation_distribution(math.sqrt(2.0))
        assert abs(transfer_service.matrix_product_lyapunov(md, 10 ** 4, 2, 0).gamma_hat) < 0.01

    def test_diagonal_pair_has_zero_exponent(self):
        md = furstenberg_service.diagonal_pair_distribution()
        assert abs(transfer_service.matrix_product_lyapunov(md, 10 ** 5, 4, 0).gamma_hat) < 0.01


class TestInvariants:
    def test_determinant_preserved_on_long_product(self, uniform_dist):
        n = 10 ** 4
        path = model_service.sample_path(uniform_dist, 0, 0, (1, n))
        for E in (-3.0, 0.5, 3.0):
            assert transfer_service.determinant_defect(E, path, n) <= 1e-6

    def test_determinant_catches_wrong_log_scale(self, uniform_dist, monkeypatch):
        n = 2000
        path = model_service.sample_path(uniform_dist, 0, 0, (1, n))
        original = transfer_service.block_product

        def shifted(E, path, start, steps):
            product = original(E, path, start, steps)
            return ScaledProduct(matrix=product.matrix, log_scale=product.log_scale + 0.05, steps=steps)

        monkeypatch.setattr(transfer_service, "block_product", shifted)
        assert transfer_service.determinant_defect(3.0, path, n) > 0.01

    def test_determinant_long_hyperbolic_product(self, wide_uniform_dist):
        n = 10 ** 4
        path = model_service.sample_path(wide_uniform_dist, 1, 0, (1, n))
        assert transfer_service.cocycle_product(0.0, path, n).log_norm() > 100.0
        assert transfer_service.determinant_defect(0.0, path, n) <= 1e-6

    def test_kingman_subadditivity(self, uniform_dist):
        for sample in range(20):
            rng = stream(4, sample)
            n, m = (int(v) for v in rng.integers(1, 1001, size=2))
            path = model_service.sample_path(uniform_dist, 4, sample, (1, n + m))
            assert transfer_service.kingman_defect(float(rng.uniform(-3.0, 3.0)), path, n, m) <= 1e-9

    def test_adjoint_alignment(self, wide_uniform_dist):
        path = model_service.sample_path(wide_uniform_dist, 2, 0, (1, 200))
        product = transfer_service.cocycle_product(0.0, path, 200)
        for sample in range(10):
            angle = stream(2, 100, sample).uniform(0.0, math.pi)
            ratio, overlap = transfer_service.adjoint_alignment(product, [math.cos(angle), math.sin(angle)])
            assert abs(ratio - overlap) < 1e-3


class TestOseledec:
    def test_singular_data_of_diagonal(self):
        product = transfer_service.matrix_product([Sl2(a=2.0, b=0.0, c=0.0, d=0.5)] * 3)
        data = transfer_service.singular_data(product)
        assert data.theta_top == pytest.approx(0.0, abs=1e-12)
        assert data.theta_bottom == pytest.approx(math.pi / 2.0)
        assert data.log_sigma_max == pytest.approx(3.0 * math.log(2.0))

    def test_short_product_is_flagged(self, free_dist):
        path = model_service.sample_path(free_dist, 0, 0, (1, 10))
        direction = transfer_service.oseledec_direction(0.0, path, 10)
        assert not direction.converged

    def test_direction_stabilizes(self, wide_uniform_dist):
        n = 30
        gamma = transfer_service.lyapunov_estimate(wide_uniform_dist, 0.0, 2000, 4, 5).gamma_hat
        path = model_service.sample_path(wide_uniform_dist, 6, 0, (1, 2 * n))
        first = transfer_service.oseledec_direction(0.0, path, n)
        second = transfer_service.oseledec_direction(0.0, path, 2 * n)
        assert first.converged and second.converged
        distance = ProjectivePoint(theta=first.theta).distance(ProjectivePoint(theta=second.theta))
        assert distance <= 10.0 * math.exp(-gamma * n) + 1e-12

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_direction_stabilizes_for_bernoulli(self, bernoulli_dist, seed):
        n = 500
        gamma = transfer_service.lyapunov_estimate(bernoulli_dist, 0.0, 10 ** 4, 8, 11).gamma_hat
        assert gamma > 0.0
        path = model_service.sample_path(bernoulli_dist, seed, 0, (1, 2 * n))
        first = transfer_service.oseledec_direction(0.0, path, n)
        second = transfer_service.oseledec_direction(0.0, path, 2 * n)
        assert first.converged and second.converged
        distance = ProjectivePoint(theta=first.theta).distance(ProjectivePoint(theta=second.theta))
        assert distance <= 10.0 * math.exp(-gamma * n) + 1e-12

    def test_growth_dichotomy(self):
        n = 10 ** 4
        strong = SiteDistribution.uniform(-6.0, 6.0)
        path = model_service.sample_path(strong, 8, 0, (1, n))
        gamma = transfer_service.cocycle_product(0.0, path, n).log_norm() / n

        contracting = transfer_service.oseledec_direction(0.0, path, n)
        shrinking = transfer_service.solution_growth(0.0, path, contracting.vector(), n)
        assert shrinking.expanding_component == 0.0
        assert abs(shrinking.slope + gamma) <= 0.15 * gamma

        for sample in range(3):
            angle = stream(8, 200, sample).uniform(0.0, math.pi)
            growing = transfer_service.solution_growth(0.0, path, [math.cos(angle), math.sin(angle)], n)
            assert abs(growing.slope - gamma) <= 0.1 * gamma

    def test_zero_vector_rejected(self, uniform_dist):
        path = model_service.sample_path(uniform_dist, 0, 0, (1, 10))
        with pytest.raises(ValueError):
            transfer_service.solution_growth(0.0, path, [0.0, 0.0], 10)
