import math

import numpy as np
import pytest

from models.schemas import SiteDistribution
from services.model_service import model_service
from utils.errors import WindowError


class TestSiteDistribution:
    def test_unnormalized_atoms_rejected(self):
        with pytest.raises(ValueError):
            SiteDistribution.atomic([(0.0, 0.3), (1.0, 0.3)])

    def test_decreasing_edges_rejected(self):
        with pytest.raises(ValueError):
            SiteDistribution.piecewise([1.0, 0.0], [1.0])

    def test_quantile_inverts_cdf(self):
        dist = SiteDistribution.piecewise([0.0, 0.5, 2.0], [1.2, 4.0 / 15.0])
        u = np.linspace(0.01, 0.99, 37)
        assert np.allclose(dist.cdf(dist.quantile(u)), u, atol=1e-12)

    def test_cdf_integral_of_uniform(self, uniform_dist):
        assert float(uniform_dist.cdf_integral(-1.0)) == 0.0
        assert float(uniform_dist.cdf_integral(0.5)) == pytest.approx(0.125)
        assert float(uniform_dist.cdf_integral(2.0)) == pytest.approx(1.5)

    def test_bernoulli_moments(self):
        dist = SiteDistribution.bernoulli(0.0, 1.0, 0.25)
        assert dist.mean() == pytest.approx(0.25)
        assert dist.variance() == pytest.approx(0.1875)

    def test_support_radius_and_density_bound(self):
        dist = SiteDistribution.uniform(-3.0, 1.0)
        assert dist.support_radius == 3.0
        assert dist.r_max == pytest.approx(0.25)


class TestSampling:
    def test_window_extension_keeps_values(self, uniform_dist):
        small = model_service.sample_path(uniform_dist, 7, 3, (4090, 4100))
        large = model_service.sample_path(uniform_dist, 7, 3, (-10, 9000))
        assert np.array_equal(small.values, large.sites(4090, 4100))

    def test_shift_is_reindexing(self, uniform_dist):
        path = model_service.sample_path(uniform_dist, 1, 0, (0, 50))
        shifted = model_service.sample_path(uniform_dist, 1, 0, (1, 51))
        assert np.array_equal(path.shift(1).sites(0, 49), shifted.values[:50])

    def test_realizations_differ(self, uniform_dist):
        first = model_service.sample_path(uniform_dist, 1, 0, (0, 99))
        second = model_service.sample_path(uniform_dist, 1, 1, (0, 99))
        assert not np.array_equal(first.values, second.values)

    def test_values_inside_support(self, bernoulli_dist):
        path = model_service.sample_path(bernoulli_dist, 2, 0, (-500, 500))
        assert set(np.unique(path.values)) <= {0.0, 1.0}

    def test_fair_coin_sample_mean(self, bernoulli_dist):
        path = model_service.sample_path(bernoulli_dist, 11, 0, (0, 10 ** 5 - 1))
        stderr = 0.5 / math.sqrt(10 ** 5)
        assert abs(path.values.mean() - 0.5) < 4.0 * stderr

    def test_empty_window_rejected(self, uniform_dist):
        with pytest.raises(WindowError):
            model_service.sample_path(uniform_dist, 0, 0, (5, 4))


class TestHamiltonian:
    def test_dirichlet_tridiagonal(self, uniform_dist):
        H = model_service.hamiltonian(uniform_dist, 0, 0, 3)
        dense = H.to_dense()
        assert dense.shape == (7, 7)
        assert np.array_equal(np.diag(dense, 1), np.ones(6))
        assert dense[0, -1] == 0.0

    def test_asymmetric_window_rejected(self, uniform_dist):
        path = model_service.sample_path(uniform_dist, 0, 0, (-2, 3))
        with pytest.raises(WindowError):
            model_service.build_hamiltonian(path)

    def test_single_site(self, uniform_dist):
        H = model_service.hamiltonian(uniform_dist, 0, 0, 0)
        assert H.size == 1


class TestSpectrum:
    def test_single_atom_shifts_laplacian(self):
        spectrum = model_service.almost_sure_spectrum(SiteDistribution.atomic([(1.5, 1.0)]))
        assert spectrum.intervals == [(-0.5, 3.5)]

    def test_uniform_support(self, uniform_dist):
        assert model_service.almost_sure_spectrum(uniform_dist).intervals == [(-2.0, 3.0)]

    def test_disjoint_translates(self):
        dist = SiteDistribution.bernoulli(0.0, 10.0)
        assert model_service.almost_sure_spectrum(dist).intervals == [(-2.0, 2.0), (8.0, 12.0)]

    def test_sigma0(self, uniform_dist):
        assert model_service.sigma0(uniform_dist) == (-3.0, 3.0)

    def test_coverage_gap(self):
        spectrum = model_service.almost_sure_spectrum(SiteDistribution.atomic([(0.0, 1.0)]))
        eigenvalues = np.array([-1.5, -1.0, 0.0, 1.0, 1.9])
        assert model_service.spectrum_coverage_gap(eigenvalues, spectrum) == pytest.approx(1.0)
        assert model_service.spectrum_coverage_gap(eigenvalues, spectrum, 0.5) == pytest.approx(1.0)
        assert model_service.spectrum_coverage_gap(np.array([0.0]), spectrum, 1.0) == pytest.approx(1.0)


class TestBirkhoff:
    def test_atom_is_exact(self):
        dist = SiteDistribution.atomic([(0.7, 1.0)])
        assert model_service.birkhoff_average(dist, 0, 1000) == pytest.approx(0.7)

    def test_uniform_mean(self, uniform_dist):
        n = 10 ** 6
        average = model_service.birkhoff_average(uniform_dist, 5, n)
        assert abs(average - 0.5) < 4.0 / math.sqrt(12 * n)

    def test_requires_positive_length(self, uniform_dist):
        with pytest.raises(WindowError):
            model_service.birkhoff_average(uniform_dist, 0, 0)
