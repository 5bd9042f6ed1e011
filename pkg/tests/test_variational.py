"""Tests for polar-grid fields, discrete energies, and optimality certificates."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from cloakmap.core import AnnulusSpec
from cloakmap.errors import (
    AdmissibilityError,
    DomainError,
    OrientationError,
    RetryBudgetError,
)
from cloakmap.radial import (
    energy_p,
    profile_affine,
    profile_minimax,
    solve_optimal_profile,
)
from cloakmap.variational import (
    PolarGrid,
    ScalarField2D,
    VectorField2D,
    _el_system_fluxes,
    _el_flux,
    _psi_bump,
    divergence,
    el_residual_2d,
    field_energy,
    field_energy_differential,
    hessian_lower_bound_check,
    lift_angle,
    lift_profile,
    perturb_psi_test,
    perturb_theta_test,
    projected_trace_cost,
    radial_direction_field,
    strict_convexity_probe,
)

LOG2 = math.log(2.0)


@pytest.fixture(scope="module")
def grid():
    return PolarGrid.uniform(0.1, 64, 128)


@pytest.fixture(scope="module")
def small_grid():
    return PolarGrid.uniform(0.1, 32, 32)


class TestPolarGrid:
    def test_weights_integrate_annulus_area(self, grid):
        # Trapezoid in r is exact on the linear Jacobian, so the weights add
        # up to the annulus area with no discretization error.  The weights
        # come back as a broadcastable column, one entry per radius.
        weights = grid.node_weights()
        assert weights.shape == (grid.n_r, 1)
        area = math.pi * (1.0 - grid.epsilon ** 2)
        total = float(np.sum(weights * np.ones(grid.n_phi)))
        assert total == pytest.approx(area, rel=1e-12)

    def test_uniform_construction(self):
        g = PolarGrid.uniform(0.25, 16, 32)
        assert g.epsilon == 0.25
        assert g.radii[0] == 0.25 and g.radii[-1] == 1.0
        assert g.angles[0] == 0.0
        assert g.h_phi == pytest.approx(2.0 * math.pi / 32)
        npt.assert_allclose(np.diff(g.radii), g.h_r)

    def test_refined_doubles_both_directions(self, small_grid):
        fine = small_grid.refined()
        assert (fine.n_r, fine.n_phi) == (64, 64)
        assert fine.epsilon == small_grid.epsilon

    def test_validation(self):
        with pytest.raises(ValueError):
            PolarGrid.uniform(0.1, 4, 128)
        with pytest.raises(ValueError):
            PolarGrid.uniform(0.1, 64, 8)
        radii = np.linspace(0.1, 0.9, 16)  # does not reach the outer circle
        angles = np.arange(16) * (2.0 * math.pi / 16)
        with pytest.raises(ValueError):
            PolarGrid(16, 16, radii, angles, radii[1] - radii[0], angles[1])


class TestFields:
    def test_gradient_exact_on_radial_quadratics(self, small_grid):
        # Central and one-sided second-order stencils are exact on r**2.
        r = small_grid.radii[:, None]
        u = ScalarField2D(small_grid, np.broadcast_to(r ** 2 - 3.0 * r, (32, 32)))
        grad = u.gradient()
        npt.assert_allclose(grad.radial, np.broadcast_to(2.0 * r - 3.0, (32, 32)),
                            atol=1e-12)
        npt.assert_allclose(grad.azimuthal, 0.0, atol=1e-12)

    def test_angle_lift_gradient_exact_across_seam(self, grid):
        grad = lift_angle(grid).gradient()
        npt.assert_allclose(grad.radial, 0.0, atol=1e-13)
        expected = np.broadcast_to(1.0 / grid.radii[:, None], (grid.n_r, grid.n_phi))
        npt.assert_allclose(grad.azimuthal, expected, rtol=1e-13)

    def test_gradient_is_linear(self, small_grid):
        rng = np.random.default_rng(0)
        bump = _psi_bump(small_grid, rng, 0.1)
        base = lift_angle(small_grid)
        direct = base.shifted(bump).gradient()
        parts_r = base.gradient().radial + ScalarField2D(small_grid, bump).gradient().radial
        npt.assert_allclose(direct.radial, parts_r, atol=1e-12)

    def test_shape_validation(self, small_grid):
        with pytest.raises(ValueError):
            ScalarField2D(small_grid, np.zeros((5, 5)))
        with pytest.raises(ValueError):
            VectorField2D(small_grid, np.zeros((32, 32)), np.zeros((4, 4)))

    def test_rotation_preserves_winding_and_values(self, small_grid):
        u = lift_angle(small_grid)
        rotated = u.rotated_one_step()
        assert rotated.winding == 1
        # One grid step of rotation sends column j to column j+1; the seam
        # column re-enters shifted down by the full winding jump.
        npt.assert_allclose(rotated.values[:, 1:], u.values[:, :-1])
        npt.assert_allclose(rotated.values[:, 0], u.values[:, -1] - 2.0 * math.pi)

    def test_rotated90_is_quarter_turn(self, small_grid):
        v = radial_direction_field(small_grid)
        jv = v.rotated90()
        npt.assert_allclose(jv.dot(v), 0.0, atol=1e-15)
        npt.assert_allclose(jv.norm_sq(), v.norm_sq(), rtol=1e-15)
        jjv = jv.rotated90()
        npt.assert_allclose(jjv.radial, -v.radial)


class TestFieldEnergy:
    def test_reduces_to_radial_energy(self, grid):
        spec = AnnulusSpec(0.1)
        profile = solve_optimal_profile(spec, 1.0)
        discrete = field_energy(lift_profile(profile, grid),
                                radial_direction_field(grid), 1.0)
        exact = energy_p(profile, 1.0).value
        assert abs(discrete - exact) / exact < 1e-3

    def test_angle_route_matches_amplitude_route(self, grid):
        # With u = angle lift and V = J D psi the pointwise integrand is the
        # same trace as in the amplitude route, so the energies agree exactly.
        profile = solve_optimal_profile(AnnulusSpec(0.1), 2.0)
        amplitude_route = field_energy(lift_profile(profile, grid),
                                       radial_direction_field(grid), 2.0)
        angle_route = field_energy(
            lift_angle(grid), lift_profile(profile, grid).gradient().rotated90(), 2.0
        )
        assert angle_route == pytest.approx(amplitude_route, rel=1e-13)

    @pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
    def test_pointwise_floor(self, small_grid, p):
        # (|Du|**2 + |V|**2) / (Du . V) >= 2 pointwise, so every admissible
        # energy is at least 2**p times the annulus area.
        floor = 2.0 ** p * math.pi * (1.0 - small_grid.epsilon ** 2)
        rng = np.random.default_rng(42)
        direction = radial_direction_field(small_grid)
        base = lift_profile(profile_affine(AnnulusSpec(0.1)), small_grid)
        for _ in range(10):
            u = base.shifted(_psi_bump(small_grid, rng, 0.05))
            assert field_energy(u, direction, p) >= floor * (1.0 - 1e-12)

    def test_rejects_misoriented_field(self, small_grid):
        upside_down = ScalarField2D(
            small_grid, -lift_profile(profile_affine(AnnulusSpec(0.1)), small_grid).values
        )
        with pytest.raises(AdmissibilityError) as info:
            field_energy(upside_down, radial_direction_field(small_grid), 2.0)
        assert info.value.nodes  # offending node indices are attached

    def test_rejects_vanishing_direction(self, small_grid):
        u = lift_profile(profile_affine(AnnulusSpec(0.1)), small_grid)
        zero = VectorField2D(small_grid, np.zeros((32, 32)), np.zeros((32, 32)))
        with pytest.raises(AdmissibilityError):
            field_energy(u, zero, 2.0)

    def test_rotation_equivariance_both_routes(self, grid):
        profile = solve_optimal_profile(AnnulusSpec(0.1), 2.0)
        rng = np.random.default_rng(3)
        u = lift_profile(profile, grid).shifted(_psi_bump(grid, rng, 0.05))
        v = radial_direction_field(grid)
        assert field_energy(u.rotated_one_step(), v.rotated_one_step(), 2.0) \
            == field_energy(u, v, 2.0)
        theta = lift_angle(grid)
        v_theta = lift_profile(profile, grid).gradient().rotated90()
        assert field_energy(theta.rotated_one_step(), v_theta.rotated_one_step(), 2.0) \
            == field_energy(theta, v_theta, 2.0)


class TestDifferential:
    @pytest.mark.parametrize("p", [1.0, 2.0])
    def test_matches_finite_differences(self, grid, p):
        rng = np.random.default_rng(7)
        base = lift_profile(profile_affine(AnnulusSpec(0.1)), grid).shifted(
            _psi_bump(grid, rng, 0.03)
        )
        direction = radial_direction_field(grid)
        h = ScalarField2D(grid, _psi_bump(grid, rng, 1.0))
        step = 1e-6
        fd = (field_energy(base.shifted(step * h.values), direction, p)
              - field_energy(base.shifted(-step * h.values), direction, p)) / (2 * step)
        gateaux = field_energy_differential(base, direction, p, h)
        assert abs(gateaux - fd) / abs(fd) < 1e-7

    def test_linear_in_the_direction(self, small_grid):
        rng = np.random.default_rng(9)
        base = lift_profile(profile_affine(AnnulusSpec(0.1)), small_grid)
        direction = radial_direction_field(small_grid)
        h = ScalarField2D(small_grid, _psi_bump(small_grid, rng, 1.0))
        one = field_energy_differential(base, direction, 2.0, h)
        three = field_energy_differential(
            base, direction, 2.0, ScalarField2D(small_grid, 3.0 * h.values)
        )
        assert three == pytest.approx(3.0 * one, rel=1e-12)


class TestProjectedTraceCost:
    def test_hand_values(self):
        assert projected_trace_cost(2.0, 1.0, 1.0, 1.0) == pytest.approx(3.0)
        assert projected_trace_cost(2.0, 1.0, 1.0, 2.0) == pytest.approx(9.0)

    def test_minimum_at_aligned_unit_projection(self):
        amp = 1.3
        floor = projected_trace_cost(amp, 0.0, amp, 3.0)
        assert floor == pytest.approx(2.0 ** 3, rel=1e-14)
        rng = np.random.default_rng(1)
        x = rng.uniform(0.05, 4.0, 500)
        y = rng.uniform(-4.0, 4.0, 500)
        assert np.all(projected_trace_cost(x, y, amp, 3.0) >= floor - 1e-12)

    def test_domain_guards(self):
        with pytest.raises(DomainError):
            projected_trace_cost(0.0, 1.0, 1.0, 2.0)
        with pytest.raises(DomainError):
            projected_trace_cost(np.array([1.0, -2.0]), 0.0, 1.0, 2.0)
        with pytest.raises(DomainError):
            projected_trace_cost(1.0, 0.0, -1.0, 2.0)


class TestHessianBound:
    def test_bound_holds_on_samples(self):
        check = hessian_lower_bound_check(1.0, 2.0, 2.0, n_samples=100, seed=4)
        assert check
        assert check.passed and not check.failures
        assert check.bound == pytest.approx(4.0 / 125.0)
        assert check.n_samples == 100

    def test_truthiness_tracks_passed(self):
        check = hessian_lower_bound_check(2.0, 1.0, 1.0, n_samples=50)
        assert bool(check) == check.passed

    def test_rejects_bad_parameters(self):
        with pytest.raises(DomainError):
            hessian_lower_bound_check(-1.0, 2.0, 2.0)
        with pytest.raises(DomainError):
            hessian_lower_bound_check(1.0, 0.0, 2.0)


class TestConvexityProbe:
    def test_gaps_nonnegative_along_profile_segment(self, grid):
        spec = AnnulusSpec(0.1)
        gaps = strict_convexity_probe(
            lift_profile(profile_minimax(spec), grid),
            lift_profile(profile_affine(spec), grid),
            radial_direction_field(grid), 2.0,
        )
        assert gaps.shape == (9,)
        assert np.all(gaps >= 0.0)

    def test_rejects_winding_mismatch(self, small_grid):
        with pytest.raises(ValueError):
            strict_convexity_probe(
                lift_angle(small_grid),
                lift_profile(profile_affine(AnnulusSpec(0.1)), small_grid),
                radial_direction_field(small_grid), 2.0,
            )


class TestDivergence:
    def test_exact_on_polynomial_flux(self, small_grid):
        r = small_grid.radii[:, None]
        shape = (small_grid.n_r, small_grid.n_phi)
        outward = VectorField2D(small_grid, np.broadcast_to(r, shape), np.zeros(shape))
        npt.assert_allclose(divergence(outward), 2.0, rtol=1e-12)
        swirl = VectorField2D(small_grid, np.zeros(shape),
                              np.broadcast_to(1.0 / r, shape))
        npt.assert_allclose(divergence(swirl), 0.0, atol=1e-12)


class TestResiduals2D:
    def test_optimal_pair_residual_decreases_under_refinement(self):
        profile = solve_optimal_profile(AnnulusSpec(0.1), 2.0)
        coarse = PolarGrid.uniform(0.1, 32, 64)
        fine = coarse.refined()
        res_c = el_residual_2d(lift_profile(profile, coarse), lift_angle(coarse), 2.0)
        res_f = el_residual_2d(lift_profile(profile, fine), lift_angle(fine), 2.0)
        assert res_c.psi_equation / res_f.psi_equation >= 1.3
        # The angle equation and the boundary condition hold identically for
        # any radial pair; their residuals sit at the rounding floor.
        for res in (res_c, res_f):
            assert res.theta_equation <= 1e-9
            assert res.boundary <= 1e-9

    def test_non_optimal_profile_leaves_residual(self):
        # The affine amplitude does not satisfy the first optimality
        # equation, so its residual survives refinement.
        spec = AnnulusSpec(0.01)
        for g in (PolarGrid.uniform(0.01, 48, 96), PolarGrid.uniform(0.01, 96, 192)):
            res = el_residual_2d(lift_profile(profile_affine(spec), g),
                                 lift_angle(g), 1.0)
            assert res.psi_equation >= 0.5
            assert res.theta_equation <= 1e-9

    def test_rejects_negative_orientation(self, small_grid):
        profile = profile_affine(AnnulusSpec(0.1))
        backwards = ScalarField2D(small_grid, -lift_angle(small_grid).values,
                                  winding=-1)
        with pytest.raises(OrientationError):
            el_residual_2d(lift_profile(profile, small_grid), backwards, 2.0)

    def test_flux_forms_agree(self, grid):
        # The paired divergence-form fluxes coincide with the single-field
        # Euler-Lagrange flux once the direction is the rotated gradient of
        # the complementary field; checked on a non-radial pair.
        rng = np.random.default_rng(11)
        profile = solve_optimal_profile(AnnulusSpec(0.1), 2.0)
        psi = lift_profile(profile, grid).shifted(_psi_bump(grid, rng, 0.02))
        theta = lift_angle(grid)
        flux_psi, flux_theta, _ = _el_system_fluxes(psi, theta, 2.0)
        j_theta = theta.gradient().rotated90()
        against_theta = VectorField2D(grid, -j_theta.radial, -j_theta.azimuthal)
        single_psi = _el_flux(psi, against_theta, 2.0)
        npt.assert_allclose(flux_psi.radial, single_psi.radial, atol=1e-12)
        npt.assert_allclose(flux_psi.azimuthal, single_psi.azimuthal, atol=1e-12)
        single_theta = _el_flux(theta, psi.gradient().rotated90(), 2.0)
        npt.assert_allclose(flux_theta.radial, single_theta.radial, atol=1e-12)
        npt.assert_allclose(flux_theta.azimuthal, single_theta.azimuthal, atol=1e-12)


class TestPerturbationSuites:
    def test_amplitude_route_zero_violations(self, small_grid):
        report = perturb_psi_test(AnnulusSpec(0.1), 2.0, n_pert=12, grid=small_grid)
        assert report.passed
        assert not report.violations
        assert len(report.perturbed_energies) == 12
        assert all(gap > 0.0 for gap in report.convexity_gap_estimates)

    def test_perturbed_energies_clear_the_closed_form(self):
        # Every perturbation of the p = 1 minimizer must stay above the
        # continuum optimum, not just above the discrete baseline.
        epsilon = 0.01
        closed = 2.0 * math.pi * (1.0 - epsilon ** 2
                                  + (2.0 / 3.0) * (2.0 * epsilon - 1.0) ** 2)
        report = perturb_psi_test(AnnulusSpec(epsilon), 1.0, n_pert=10, seed=1)
        assert all(energy > closed for _, energy in report.perturbed_energies)

    @pytest.mark.parametrize("kind,p", [("affine", 2.0), ("optimal", 3.0)])
    def test_angle_route_zero_violations(self, small_grid, kind, p):
        report = perturb_theta_test(AnnulusSpec(0.1), kind, p, n_pert=8,
                                    grid=small_grid, seed=2)
        assert report.passed
        assert len(report.perturbed_energies) == 8

    def test_zero_amplitude_reproduces_baseline(self, small_grid):
        report = perturb_psi_test(AnnulusSpec(0.1), 2.0, n_pert=5,
                                  amplitude=0.0, grid=small_grid)
        assert all(energy == report.baseline_energy
                   for _, energy in report.perturbed_energies)

    def test_retry_budget_exhaustion(self, small_grid):
        with pytest.raises(RetryBudgetError):
            perturb_psi_test(AnnulusSpec(0.1), 2.0, n_pert=2, amplitude=50.0,
                             grid=small_grid, retry_budget=4)

    def test_unknown_base_profile_kind(self):
        with pytest.raises(ValueError):
            perturb_theta_test(AnnulusSpec(0.1), "spiral", 2.0)

    def test_report_is_deterministic_in_the_seed(self, small_grid):
        first = perturb_psi_test(AnnulusSpec(0.1), 2.0, n_pert=4,
                                 grid=small_grid, seed=21)
        second = perturb_psi_test(AnnulusSpec(0.1), 2.0, n_pert=4,
                                  grid=small_grid, seed=21)
        assert first.perturbed_energies == second.perturbed_energies
