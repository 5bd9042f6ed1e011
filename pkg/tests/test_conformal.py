"""Tests for analytic disk maps and conformally transferred cloaking maps."""

import math

import numpy as np
import numpy.testing as npt
import pytest

from cloakmap.conformal import (
    BUILTIN_MAP_NAMES,
    AnalyticMap,
    ComposedCloakMap,
    builtin_map,
    cloak_map_jacobian,
    composed_analytic,
    conformality_defect,
    evaluate_cloak_map,
    identity_map,
    inner_hole_deviation,
    inverse_second_derivative_max,
    modified_energy,
    perturbed_power_map,
    pushforward_trace_at,
    sample_rays,
    sinh_domain_map,
)
from cloakmap.core import AnnulusSpec, push_forward_tensor
from cloakmap.errors import (
    DomainError,
    OutOfAnnulusError,
    UnknownMapError,
)
from cloakmap.radial import energy_p, profile_minimax, profile_p1, solve_optimal_profile
from cloakmap.variational import PolarGrid

EPSILON = 0.1


def all_builtins():
    return [builtin_map(name) for name in BUILTIN_MAP_NAMES]


def disk_samples(radius=0.9, n=80, seed=0):
    rng = np.random.default_rng(seed)
    rho = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    ang = rng.uniform(0.0, 2.0 * math.pi, n)
    return rho * np.exp(1j * ang)


class TestAnalyticMap:
    def test_rejects_origin_displacement(self):
        with pytest.raises(ValueError):
            AnalyticMap("shift", lambda z: z + 0.1, lambda w: w - 0.1,
                        lambda z: np.ones_like(np.asarray(z, dtype=complex)))

    def test_rejects_rotated_normalization(self):
        with pytest.raises(ValueError):
            AnalyticMap("twist", lambda z: 1j * np.asarray(z, dtype=complex),
                        lambda w: -1j * np.asarray(w, dtype=complex),
                        lambda z: 1j * np.ones_like(np.asarray(z, dtype=complex)))

    def test_scale_at_origin(self):
        assert identity_map().scale_at_origin == 1.0
        assert sinh_domain_map().scale_at_origin == pytest.approx(1.0)
        assert perturbed_power_map().scale_at_origin == pytest.approx(1.0)

    def test_inverse_derivative_fallback(self):
        # Without an explicit inverse derivative the reciprocal rule applies.
        bare = AnalyticMap("bare", lambda z: np.asarray(z, dtype=complex),
                           lambda w: np.asarray(w, dtype=complex),
                           lambda z: np.ones_like(np.asarray(z, dtype=complex)))
        w = disk_samples(n=16)
        npt.assert_allclose(bare.inverse_derivative(w), 1.0, rtol=1e-14)

    def test_round_trips(self):
        w = disk_samples()
        for analytic in all_builtins():
            domain = np.asarray(analytic.inverse(w), dtype=complex)
            assert analytic.round_trip_deviation(domain) < 1e-10

    def test_builtin_lookup(self):
        assert builtin_map("sinh").tag == "sinh_domain"
        custom = builtin_map("perturbed_power", c=0.1, k=3)
        assert "k=3" in custom.tag
        with pytest.raises(UnknownMapError):
            builtin_map("mercator")


class TestSinhDomainMap:
    def test_branch_cut_is_rejected(self):
        analytic = sinh_domain_map()
        with pytest.raises(DomainError):
            analytic.forward(1.2j)
        with pytest.raises(DomainError):
            analytic.forward(np.array([0.3 + 0.1j, -1.5j]))

    def test_derivative_consistency(self):
        analytic = sinh_domain_map()
        w = disk_samples(n=32, seed=3)
        z = np.sinh(w)
        npt.assert_allclose(np.asarray(analytic.derivative(z)) * np.cosh(w), 1.0,
                            rtol=1e-12)


class TestPerturbedPowerMap:
    def test_univalence_guards(self):
        with pytest.raises(ValueError):
            perturbed_power_map(c=0.5, k=2)
        with pytest.raises(ValueError):
            perturbed_power_map(c=0.1, k=1)

    def test_newton_round_trip(self):
        analytic = perturbed_power_map(c=0.2, k=2)
        w = disk_samples(radius=1.0, n=200, seed=8)
        z = np.asarray(analytic.inverse(w), dtype=complex)
        npt.assert_allclose(np.asarray(analytic.forward(z)), w, atol=1e-12)

    def test_derivative_is_reciprocal_of_inverse_derivative(self):
        analytic = perturbed_power_map(c=0.15, k=3)
        w = disk_samples(n=40, seed=9)
        z = np.asarray(analytic.inverse(w), dtype=complex)
        product = np.asarray(analytic.derivative(z)) * np.asarray(
            analytic.inverse_derivative(w)
        )
        npt.assert_allclose(product, 1.0, rtol=1e-11)


class TestComposedAnalytic:
    def test_composition_round_trip_and_tag(self):
        combo = composed_analytic(sinh_domain_map(), perturbed_power_map())
        assert combo.tag == "composite"
        w = disk_samples(n=60, seed=12)
        domain = np.asarray(combo.inverse(w), dtype=complex)
        assert combo.round_trip_deviation(domain) < 1e-10

    def test_chain_rule(self):
        combo = composed_analytic(sinh_domain_map(), perturbed_power_map())
        w = disk_samples(n=25, seed=13)
        z = np.asarray(combo.inverse(w), dtype=complex)
        product = np.asarray(combo.derivative(z)) * np.asarray(
            combo.inverse_derivative(w)
        )
        npt.assert_allclose(product, 1.0, rtol=1e-10)


class TestCloakMapEvaluation:
    def make(self, analytic):
        return ComposedCloakMap(analytic, profile_p1(AnnulusSpec(EPSILON)))

    def test_identity_map_is_the_radial_stretch(self):
        m = self.make(identity_map())
        r = np.linspace(EPSILON, 1.0, 9)
        points = np.stack([r * math.cos(0.7), r * math.sin(0.7)], axis=-1)
        images = evaluate_cloak_map(m, points)
        radii = np.hypot(images[:, 0], images[:, 1])
        npt.assert_allclose(radii, np.exp(m.profile.value_at(r)), rtol=1e-12)

    @pytest.mark.parametrize("name", BUILTIN_MAP_NAMES)
    def test_boundary_contracts(self, name):
        m = self.make(builtin_map(name))
        angles = np.arange(64) * (2.0 * math.pi / 64)
        outer = np.asarray(m.analytic.inverse(np.exp(1j * angles)), dtype=complex)
        outer_pts = np.stack([outer.real, outer.imag], axis=-1)
        fixed = evaluate_cloak_map(m, outer_pts)
        assert np.max(np.abs(fixed - outer_pts)) <= 1e-9

        inner = np.asarray(m.analytic.inverse(EPSILON * np.exp(1j * angles)),
                           dtype=complex)
        image = evaluate_cloak_map(m, np.stack([inner.real, inner.imag], axis=-1))
        want = np.asarray(m.analytic.inverse(0.5 * np.exp(1j * angles)),
                          dtype=complex)
        npt.assert_allclose(image[:, 0], want.real, atol=1e-9)
        npt.assert_allclose(image[:, 1], want.imag, atol=1e-9)

    def test_complex_and_point_inputs_agree(self):
        m = self.make(sinh_domain_map())
        rng = np.random.default_rng(2)
        w = rng.uniform(0.15, 0.95, 20) * np.exp(1j * rng.uniform(0, 2 * math.pi, 20))
        z = np.asarray(m.analytic.inverse(w), dtype=complex)
        as_points = np.stack([z.real, z.imag], axis=-1)
        npt.assert_allclose(evaluate_cloak_map(m, z),
                            evaluate_cloak_map(m, as_points), atol=0)

    def test_rejects_points_outside_the_annulus(self):
        m = self.make(sinh_domain_map())
        hole_point = np.asarray(m.analytic.inverse(0.04 + 0.0j), dtype=complex)
        with pytest.raises(OutOfAnnulusError):
            evaluate_cloak_map(m, complex(hole_point))
        with pytest.raises(OutOfAnnulusError):
            evaluate_cloak_map(m, 50.0 + 0.0j)


class TestJacobianAndTrace:
    @pytest.mark.parametrize("name", BUILTIN_MAP_NAMES)
    def test_pushforward_tensor_is_admissible(self, name):
        m = ComposedCloakMap(builtin_map(name), profile_p1(AnnulusSpec(EPSILON)))
        rho = np.linspace(0.15, 0.95, 7)
        y = rho * np.exp(1j * np.linspace(0.0, 5.0, 7))
        z = np.asarray(m.analytic.inverse(y), dtype=complex)
        jac = cloak_map_jacobian(m, z)
        for j in jac:
            tensor = push_forward_tensor(j)  # validates unit determinant
            assert tensor.trace >= 2.0 - 1e-12

    @pytest.mark.parametrize("name", ["sinh_domain", "perturbed_power"])
    @pytest.mark.parametrize("profile_factory", [profile_p1, profile_minimax])
    def test_trace_transfers_from_the_radial_profile(self, name, profile_factory):
        profile = profile_factory(AnnulusSpec(EPSILON))
        m = ComposedCloakMap(builtin_map(name), profile)
        for rho, ang in ((0.2, 0.3), (0.5, 2.0), (0.85, 4.4)):
            z = complex(np.asarray(
                m.analytic.inverse(rho * np.exp(1j * ang))).reshape(())
            )
            fd_trace = pushforward_trace_at(m, z)
            assert fd_trace == pytest.approx(profile.trace_at(rho), abs=1e-5)

    def test_trace_fd_stencil_shrinks_near_boundary(self):
        m = ComposedCloakMap(identity_map(), profile_p1(AnnulusSpec(EPSILON)))
        near_outer = 1.0 - 1e-7
        trace = pushforward_trace_at(m, complex(near_outer))
        assert trace == pytest.approx(m.profile.trace_at(near_outer), abs=1e-3)

    def test_trace_unreachable_outside(self):
        m = ComposedCloakMap(identity_map(), profile_p1(AnnulusSpec(EPSILON)))
        with pytest.raises(OutOfAnnulusError):
            pushforward_trace_at(m, 1.5 + 0.0j)


class TestModifiedEnergy:
    def test_independent_of_the_analytic_map(self):
        profile = profile_p1(AnnulusSpec(EPSILON))
        grid = PolarGrid.uniform(EPSILON, 64, 128)
        values = [modified_energy(ComposedCloakMap(analytic, profile), 1.0, grid)
                  for analytic in all_builtins()]
        spread = (max(values) - min(values)) / values[0]
        assert spread <= 1e-12
        closed = 2.0 * math.pi * (1.0 - EPSILON ** 2
                                  + (2.0 / 3.0) * (2.0 * EPSILON - 1.0) ** 2)
        assert values[0] == pytest.approx(closed, rel=1e-6)

    def test_halfway_annulus_value(self):
        # At epsilon = 1/2 the optimal profile is log r, the trace is the
        # constant 2, and the energy is 2**p times the annulus area.
        profile = solve_optimal_profile(AnnulusSpec(0.5), 3.0)
        grid = PolarGrid.uniform(0.5, 32, 32)
        m = ComposedCloakMap(sinh_domain_map(), profile)
        assert modified_energy(m, 3.0, grid) == pytest.approx(
            8.0 * math.pi * 0.75, rel=1e-12
        )

    def test_rejects_mismatched_grid(self):
        profile = profile_p1(AnnulusSpec(0.1))
        with pytest.raises(ValueError):
            modified_energy(ComposedCloakMap(identity_map(), profile), 1.0,
                            PolarGrid.uniform(0.2, 32, 32))


class TestRays:
    def test_identity_rays_are_straight_and_nested(self):
        m = ComposedCloakMap(identity_map(), profile_p1(AnnulusSpec(EPSILON)))
        rays = sample_rays(m, 8, n_points=16)
        assert len(rays) == 8
        for k, ray in enumerate(rays):
            assert ray.angle == pytest.approx(2.0 * math.pi * k / 8 + math.pi / 8)
            assert ray.source.shape == (16, 2)
            # Straightness: every segment is parallel to the first.
            d = np.diff(ray.source, axis=0)
            cross = d[:, 0] * d[0, 1] - d[:, 1] * d[0, 0]
            npt.assert_allclose(cross, 0.0, atol=1e-14)
            # The image ray occupies only the outer part of the same line.
            source_r = np.hypot(ray.source[:, 0], ray.source[:, 1])
            image_r = np.hypot(ray.image[:, 0], ray.image[:, 1])
            assert source_r[0] == pytest.approx(EPSILON)
            assert image_r[0] == pytest.approx(0.5)
            npt.assert_allclose(source_r[-1], 1.0, atol=1e-12)
            npt.assert_allclose(ray.image[-1], ray.source[-1], atol=1e-12)

    def test_curved_rays_share_endpoints_on_the_outer_boundary(self):
        m = ComposedCloakMap(sinh_domain_map(), profile_p1(AnnulusSpec(EPSILON)))
        for ray in sample_rays(m, 5, n_points=12):
            npt.assert_allclose(ray.image[-1], ray.source[-1], atol=1e-12)

    def test_validation(self):
        m = ComposedCloakMap(identity_map(), profile_p1(AnnulusSpec(EPSILON)))
        with pytest.raises(ValueError):
            sample_rays(m, 0)
        with pytest.raises(ValueError):
            sample_rays(m, 4, n_points=1)


class TestHoleGeometry:
    def test_identity_hole_is_a_circle(self):
        assert inner_hole_deviation(identity_map(), 0.1) <= 1e-15

    def test_power_perturbation_deviation_is_exact(self):
        # inverse(x) - x = c x**2 has constant modulus |c| eps**2 on the circle.
        deviation = inner_hole_deviation(perturbed_power_map(c=0.2, k=2), 0.1)
        assert deviation == pytest.approx(0.2 * 0.1 ** 2, rel=1e-12)

    def test_sinh_deviation_value_and_quadratic_bound(self):
        analytic = sinh_domain_map()
        deviation = inner_hole_deviation(analytic, 0.1)
        assert deviation == pytest.approx(math.sinh(0.1) - 0.1, rel=1e-10)
        curvature = inverse_second_derivative_max(analytic)
        assert deviation <= 0.5 * curvature * 0.1 ** 2

    def test_deviation_ratio_stays_bounded(self):
        analytic = sinh_domain_map()
        ratios = [inner_hole_deviation(analytic, e) / e ** 2
                  for e in (0.1, 0.05, 0.025)]
        assert ratios[0] >= ratios[1] >= ratios[2]
        assert ratios[0] <= 0.5 * inverse_second_derivative_max(analytic)

    def test_epsilon_domain(self):
        with pytest.raises(DomainError):
            inner_hole_deviation(identity_map(), 0.0)
        with pytest.raises(DomainError):
            inner_hole_deviation(identity_map(), 0.7)

    def test_second_derivative_sup(self):
        assert inverse_second_derivative_max(identity_map()) <= 1e-10
        assert inverse_second_derivative_max(sinh_domain_map()) == pytest.approx(
            math.sinh(0.5), rel=1e-6
        )


class TestConformality:
    @pytest.mark.parametrize("name", BUILTIN_MAP_NAMES)
    def test_defect_is_negligible(self, name):
        analytic = builtin_map(name)
        for z in (0.2 + 0.1j, -0.4 + 0.3j, 0.05 - 0.6j):
            domain_point = complex(np.asarray(analytic.inverse(z)).reshape(()))
            assert conformality_defect(analytic, domain_point) <= 1e-8
