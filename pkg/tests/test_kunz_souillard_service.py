import numpy as np
import pytest

from models.schemas import GridFunction, RealGrid, RhoOperatorResult, RouteComparison
from services.check_service import INVOLUTION_FACTOR, shell_profile
from services.kunz_souillard_service import KsOperators, kunz_souillard_service
from utils.errors import DistributionError, WindowError
from utils.rng import stream

GRID = RealGrid(half_width=16.0, points=1024)


class TestOperators:
    def test_atomic_distribution_rejected(self, free_dist):
        with pytest.raises(DistributionError):
            KsOperators(free_dist, 0.0, GRID)

    def test_odd_grid_rejected(self):
        with pytest.raises(ValueError):
            RealGrid(half_width=4.0, points=101)

    @pytest.mark.parametrize("E", [-3.0, 0.5, 3.0])
    def test_stencil_carries_unit_mass(self, uniform_dist, E):
        assert KsOperators(uniform_dist, E, GRID).stencil_mass() == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("E", [-3.0, 0.0, 2.5])
    def test_t0_preserves_mass(self, uniform_dist, E):
        f = shell_profile(GRID)
        image = kunz_souillard_service.op_T0(KsOperators(uniform_dist, E, GRID), f)
        assert abs(image.l1_norm() - f.l1_norm()) / f.l1_norm() < 1e-9

    def test_u_is_approximate_involution(self):
        grid = RealGrid(half_width=4.0, points=2048)
        f = shell_profile(grid)
        op = kunz_souillard_service.op_U
        back = op(op(f))
        assert f.with_values(back.values - f.values).l2_norm() / f.l2_norm() <= INVOLUTION_FACTOR * grid.spacing

    def test_u_is_l2_contraction(self):
        for sample in range(5):
            f = GridFunction(grid=GRID, values=stream(0, sample).normal(size=GRID.points))
            assert kunz_souillard_service.op_U(f).l2_norm() <= f.l2_norm() * (1.0 + 1e-12)

    def test_t1_is_l2_contraction(self, uniform_dist):
        ops = KsOperators(uniform_dist, 0.3, GRID)
        f = GridFunction(grid=GRID, values=stream(1).normal(size=GRID.points))
        assert kunz_souillard_service.op_T1(ops, f).l2_norm() <= f.l2_norm() * (1.0 + 1e-12)

    def test_dense_assembly_matches_operator(self, uniform_dist):
        grid = RealGrid(half_width=8.0, points=256)
        ops = KsOperators(uniform_dist, 0.5, grid)
        values = stream(2).normal(size=grid.points)
        assert np.allclose(ops.assemble_T0() @ values, ops.apply_T0(values), atol=1e-12)
        assert np.allclose(ops.t0_column_l2(), np.linalg.norm(ops.assemble_T0(), axis=0))

    def test_large_assembly_rejected(self, uniform_dist):
        ops = KsOperators(uniform_dist, 0.0, RealGrid(half_width=8.0, points=8192))
        with pytest.raises(ValueError):
            ops.assemble_T0()

    def test_phi_is_density_of_shifted_site(self, uniform_dist):
        ops = KsOperators(uniform_dist, 0.5, GRID)
        assert GridFunction(grid=GRID, values=ops.phi()).l1_norm() == pytest.approx(1.0)


class TestNorms:
    def test_certificate_bounds(self, uniform_dist):
        report = kunz_souillard_service.norm_certify(
            uniform_dist, e_points=3, half_width=8.0, points=256, assembly_points=128
        )
        assert len(report.energies) == 3
        assert report.sup_t0_11 <= 1.0 + 1e-9
        assert report.sup_t1_22 <= 1.0 + 1e-9
        assert report.sup_t1sq_22 <= 1.0 + 1e-9
        assert report.delta == pytest.approx(1.0 - report.sup_t1sq_22)

    def test_margin_stable_under_grid_doubling(self, uniform_dist):
        coarse = kunz_souillard_service.norm_certify(
            uniform_dist, e_points=5, half_width=8.0, points=256, assembly_points=128
        )
        fine = kunz_souillard_service.norm_certify(
            uniform_dist, e_points=5, half_width=8.0, points=512, assembly_points=128
        )
        assert coarse.delta > 0.0
        assert fine.delta > 0.0
        assert abs(coarse.delta - fine.delta) <= 2.0 * coarse.budget + 1e-12

    def test_spread_across_energies(self, uniform_dist):
        report = kunz_souillard_service.norm_certify(
            uniform_dist, e_points=5, half_width=8.0, points=256, assembly_points=128
        )
        assert len(report.t1sq_22) == 5
        assert report.spread_t1sq_22 == pytest.approx(max(report.t1sq_22) - min(report.t1sq_22))
        assert all(value < 1.0 for value in report.t1sq_22)

    def test_singular_values_sorted(self, uniform_dist):
        ops = KsOperators(uniform_dist, 0.0, RealGrid(half_width=8.0, points=256))
        values = kunz_souillard_service.singular_value_decay(ops, k=5)
        assert len(values) == 5
        assert np.all(np.diff(values) <= 0)
        assert values[0] <= 1.0 + 1e-9


class TestRhoOperator:
    @pytest.mark.parametrize("m", [0, 3])
    def test_m_outside_range_rejected(self, uniform_dist, m):
        with pytest.raises(WindowError):
            kunz_souillard_service.rho_operator_profile(uniform_dist, 2, [m], e_points=3, half_width=4.0, points=64)

    def test_profile_values(self, uniform_dist):
        results = kunz_souillard_service.rho_operator_profile(
            uniform_dist, 2, [1, 2], e_points=5, half_width=8.0, points=256
        )
        assert [r.m for r in results] == [1, 2]
        for result in results:
            assert result.value > 0.0
            assert result.budget == pytest.approx(abs(result.value - result.coarse_value))

    def test_refinement_is_configurable(self, uniform_dist):
        default = kunz_souillard_service.rho_operator_profile(
            uniform_dist, 2, [2], e_points=5, half_width=8.0, points=256
        )[0]
        doubled = kunz_souillard_service.rho_operator_profile(
            uniform_dist, 2, [2], e_points=5, half_width=8.0, points=256, refine_x=1.0, refine_n=2
        )[0]
        assert doubled.coarse_value == default.coarse_value
        assert doubled.budget == pytest.approx(abs(doubled.value - doubled.coarse_value))


class TestRouteEquivalence:
    def test_operator_route_matches_monte_carlo(self, uniform_dist):
        profile = kunz_souillard_service.rho_operator_profile(
            uniform_dist, 3, [1, 2, 3], e_points=33, half_width=16.0, points=2048
        )
        comparisons = kunz_souillard_service.route_comparison(uniform_dist, profile, 2000, 0)
        assert [c.m for c in comparisons] == [1, 2, 3]
        for c in comparisons:
            assert c.stderr > 0.0
            assert abs(c.rho_operator - c.rho_mc) <= 3.0 * (c.stderr + c.budget)
            assert c.agrees

    def test_disagreement_is_flagged(self):
        result = RhoOperatorResult(L=3, m=2, value=0.5, coarse_value=0.5, budget=0.0)
        comparison = RouteComparison.compare(result, 0.4, 0.01)
        assert comparison.discrepancy == pytest.approx(0.1)
        assert not comparison.agrees

    def test_decay_bound_holds(self, uniform_dist):
        report = kunz_souillard_service.norm_certify(
            uniform_dist, e_points=5, half_width=8.0, points=256, assembly_points=128
        )
        profile = kunz_souillard_service.rho_operator_profile(
            uniform_dist, 4, [1, 2, 3, 4], e_points=5, half_width=8.0, points=256
        )
        bounds = kunz_souillard_service.decay_bounds(uniform_dist, report, profile)
        assert [b.m for b in bounds] == [1, 2, 3, 4]
        assert bounds[1].bound == pytest.approx(6.0)
        assert all(b.holds for b in bounds)
        assert bounds[3].bound < bounds[1].bound


class TestJacobian:
    def test_three_site_identity(self):
        check = kunz_souillard_service.jacobian_check(1, [0.3, -0.2, 0.5], 2)
        assert check.relative_defect < 1e-5
        assert check.det_closed_form == pytest.approx(check.phi0_inverse_square, rel=1e-10)
        assert check.ratio_defect < 1e-10

    def test_survey(self):
        checks = kunz_souillard_service.jacobian_survey([1, 2], 2, 0)
        assert len(checks) == 4
        assert max(check.relative_defect for check in checks) < 1e-4
