import math

import pytest

from models.experiment import CheckSection
from services.check_service import CheckService
from utils.errors import WindowError

SMALL = CheckSection(
    L_max=5,
    containment_realizations=3,
    coverage_L=50,
    coverage_realizations=1,
    product_steps=1000,
    kingman_samples=5,
    herglotz_samples=20,
    interlacing_realizations=2,
    ks_grid_n=2048,
    jacobian_instances=1,
)


class TestCheckSuite:
    def test_free_chain_passes_everything(self, free_dist):
        results = CheckService(free_dist, SMALL, 0).run_suite()
        assert [r.name for r in results] == [name for name, _ in CheckService(free_dist, SMALL, 0).checks()]
        failed = [r.name for r in results if not r.passed]
        assert failed == []

    def test_density_checks_skipped_for_atoms(self, free_dist):
        result = CheckService(free_dist, SMALL, 0).mass_preservation()
        assert result.skipped
        assert result.passed

    def test_mass_preservation_with_density(self, uniform_dist):
        result = CheckService(uniform_dist, SMALL, 0).mass_preservation()
        assert not result.skipped
        assert result.passed

    def test_failing_check_does_not_stop_suite(self, free_dist, monkeypatch):
        suite = CheckService(free_dist, SMALL, 0)

        def broken():
            raise WindowError("окно слишком короткое")

        monkeypatch.setattr(suite, "herglotz_sign", broken)
        results = {r.name: r for r in suite.run_suite()}
        assert not results["herglotz_sign"].passed
        assert math.isnan(results["herglotz_sign"].measured)
        assert results["interlacing"].passed

    @pytest.mark.parametrize("check", ["determinant_preservation", "kingman_subadditivity", "aronszajn_krein"])
    def test_cocycle_and_resolvent_checks(self, bernoulli_dist, check):
        assert getattr(CheckService(bernoulli_dist, SMALL, 2), check)().passed

    def test_coverage_reports_edge_gap(self, bernoulli_dist):
        section = SMALL.model_copy(update={"coverage_realizations": 20})
        result = CheckService(bernoulli_dist, section, 1).spectrum_coverage()
        assert "0.5" in result.detail

    def test_route_equivalence_with_density(self, uniform_dist):
        result = CheckService(uniform_dist, SMALL, 0).route_equivalence()
        assert not result.skipped
        assert result.passed
        assert result.measured <= 1.0

    def test_route_equivalence_skipped_for_atoms(self, bernoulli_dist):
        assert CheckService(bernoulli_dist, SMALL, 0).route_equivalence().skipped
