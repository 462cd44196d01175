import math

import numpy as np
import pytest

from constants.defaults import FURSTENBERG_TOL
from models.schemas import MatrixDistribution, ProjectiveMeasure, ProjectivePoint, Sl2
from services.furstenberg_service import furstenberg_service
from services.transfer_service import transfer_service

DIAGONAL = Sl2(a=2.0, b=0.0, c=0.0, d=0.5)


class TestProjectiveAction:
    def test_quarter_turn(self):
        rotation = Sl2(a=0.0, b=-1.0, c=1.0, d=0.0)
        image = furstenberg_service.project_action(rotation, ProjectivePoint(theta=0.0))
        assert image.theta == pytest.approx(math.pi / 2.0)

    def test_antipodes_identified(self):
        assert ProjectivePoint.from_angle(math.pi + 0.3).theta == pytest.approx(0.3)
        assert ProjectivePoint(theta=0.01).distance(ProjectivePoint(theta=math.pi - 0.01)) == pytest.approx(0.02)

    def test_transfer_operator_is_stochastic(self, uniform_dist):
        md = furstenberg_service.anderson_distribution(uniform_dist, 0.3)
        operator = furstenberg_service.transfer_operator(md, 128)
        assert np.allclose(np.asarray(operator.sum(axis=0)).ravel(), 1.0)


class TestInvariantMeasure:
    def test_rotation_keeps_uniform_measure(self):
        md = furstenberg_service.rotation_distribution(math.sqrt(2.0))
        measure = furstenberg_service.invariant_measure(md, 256)
        assert measure.converged
        assert np.allclose(measure.weights, 1.0 / 256)
        assert furstenberg_service.furstenberg_gamma(md, measure) == pytest.approx(0.0, abs=1e-12)

    def test_diagonal_pair_gamma_vanishes(self):
        md = furstenberg_service.diagonal_pair_distribution()
        dirac = furstenberg_service.dirac_measure(2048, 0.0)
        assert abs(furstenberg_service.furstenberg_gamma(md, dirac)) < 1e-3

    def test_coarse_grid_rejected(self):
        md = furstenberg_service.rotation_distribution(0.5)
        with pytest.raises(ValueError):
            furstenberg_service.invariant_measure(md, 32)

    def test_iteration_budget_reported(self, uniform_dist):
        md = furstenberg_service.anderson_distribution(uniform_dist, 0.0)
        measure = furstenberg_service.invariant_measure(md, 256, tol=1e-15, max_iter=3)
        assert not measure.converged
        assert measure.iterations == 3
        assert float(measure.weights.sum()) == pytest.approx(1.0, abs=1e-12)

    def test_formula_matches_direct_estimate(self, wide_uniform_dist):
        md = furstenberg_service.anderson_distribution(wide_uniform_dist, 0.0)
        measure = furstenberg_service.invariant_measure(md, 1024)
        assert measure.converged
        gamma = furstenberg_service.furstenberg_gamma(md, measure)
        direct = transfer_service.lyapunov_estimate(wide_uniform_dist, 0.0, 20000, 8, 3)
        assert abs(gamma - direct.gamma_hat) <= max(3.0 * direct.stderr, 5e-3)

    def test_nested_supports(self, wide_uniform_dist):
        base = furstenberg_service.anderson_distribution(wide_uniform_dist, 0.0)
        middle = base.extend([(DIAGONAL, 0.05)])
        outer = middle.extend([(transfer_service.step_matrix(0.0, 5.0), 0.05)])
        assert base.size < middle.size < outer.size
        assert np.array_equal(outer.matrices[:middle.size], middle.matrices)
        assert np.array_equal(middle.matrices[:base.size], base.matrices)
        measures = furstenberg_service.support_monotonicity_study([base, middle, outer], 512)
        assert len(measures) == 3
        assert all(m.converged and m.residual <= FURSTENBERG_TOL for m in measures)
        assert all(float(m.weights.sum()) == pytest.approx(1.0, abs=1e-9) for m in measures)

    def test_bernoulli_measure_is_not_atomic(self, bernoulli_dist):
        md = furstenberg_service.anderson_distribution(bernoulli_dist, 0.0)
        peaks = []
        for G in (256, 512, 1024):
            measure = furstenberg_service.invariant_measure(md, G, max_iter=10 ** 5)
            assert measure.converged
            peaks.append(float(measure.weights.max()))
        assert peaks[2] < peaks[0]

    def test_bernoulli_formula_matches_direct_estimate(self, bernoulli_dist):
        md = furstenberg_service.anderson_distribution(bernoulli_dist, 0.0)
        measure = furstenberg_service.invariant_measure(md, 2048, max_iter=10 ** 5)
        assert measure.converged
        gamma = furstenberg_service.furstenberg_gamma(md, measure)
        direct = transfer_service.lyapunov_estimate(bernoulli_dist, 0.0, 20000, 8, 3)
        assert gamma > 0.0
        assert abs(gamma - direct.gamma_hat) <= max(3.0 * direct.stderr, 5e-3)

    def test_bernoulli_atoms_used_directly(self, bernoulli_dist):
        md = furstenberg_service.anderson_distribution(bernoulli_dist, 1.0)
        assert md.size == 2
        assert np.allclose(md.matrices[:, 0, 0], [1.0, 0.0])


class TestConcentration:
    def test_deterministic_contraction(self):
        md = MatrixDistribution.from_list([(DIAGONAL, 1.0)])
        measure = ProjectiveMeasure.uniform(2048)
        assert furstenberg_service.concentration_diagnostic(md, measure, 20, 2, 0) < 1e-6

    def test_anderson_products_concentrate(self, uniform_dist):
        md = furstenberg_service.anderson_distribution(uniform_dist, 0.0)
        measure = ProjectiveMeasure.uniform(512)
        assert furstenberg_service.concentration_diagnostic(md, measure, 1000, 2, 0) < 1e-3

    def test_uniform_measure_is_spread(self):
        assert ProjectiveMeasure.uniform(64).circular_variance() == pytest.approx(1.0)


class TestWitnesses:
    def test_unipotent_witnesses(self, uniform_dist):
        report = furstenberg_service.anderson_witnesses(uniform_dist, 0.0)
        assert report.first_fixes_e1
        assert report.second_moves_e1
        assert report.power_log_norms == sorted(report.power_log_norms)
        assert report.power_log_norms[-1] > report.power_log_norms[0] + 3.0

    def test_single_atom_has_no_witness(self, free_dist):
        with pytest.raises(ValueError):
            furstenberg_service.anderson_witnesses(free_dist, 0.0)

    def test_extend_keeps_probability(self):
        md = furstenberg_service.diagonal_flip_distribution()
        extended = md.extend([(DIAGONAL.inverse(), 0.1)])
        assert extended.size == 3
        assert float(extended.weights.sum()) == pytest.approx(1.0)

    def test_refinement_study_shapes(self, wide_uniform_dist):
        md = furstenberg_service.anderson_distribution(wide_uniform_dist, 0.0)
        study = furstenberg_service.grid_refinement_study(md, [128, 256, 512])
        assert len(study.gammas) == 3
        assert len(study.differences) == 2
        assert len(study.ratios) == 1
        assert all(gamma > 0 for gamma in study.gammas)

    def test_refinement_is_first_order(self, wide_uniform_dist):
        md = furstenberg_service.anderson_distribution(wide_uniform_dist, 0.0)
        study = furstenberg_service.grid_refinement_study(md, [256, 512, 1024, 2048])
        assert all(ratio < 2.0 for ratio in study.ratios)
        assert study.differences[-1] < study.differences[0]
