"""Measure audits: derivative subadditivity, V' convexity and asymptotic
slopes, even-measure rigidity, the isoperimetric profile."""

import math

import numpy as np
import pytest
from scipy.special import spence

from ehrhard_lab.errors import DomainError, ParameterError, PrecisionError, PreconditionError
from ehrhard_lab.measures import (audit_measure, epigraph_ray_check, even_rigidity_check,
                                  gaussian_potential, isoperimetric_profile,
                                  make_potential, quartic_potential,
                                  subadditivity_margin_at, vprime_convexity_and_slopes,
                                  vprime_subadditive)
from ehrhard_lab.pdi import WeightPair


@pytest.fixture(scope="module")
def gaussian():
    return gaussian_potential()


@pytest.fixture(scope="module")
def quartic():
    return quartic_potential()


def softplus_blend_potential():
    """V' = x + log(1+e^x): slope 1 at -inf, 2 at +inf, convex throughout."""
    def V(x):
        x = np.asarray(x, dtype=float)
        return x ** 2 / 2 - spence(1.0 + np.exp(np.minimum(x, 30.0))) \
            + np.where(x > 30.0, x * 0.0, 0.0)

    def Vp(x):
        x = np.asarray(x, dtype=float)
        return x + np.logaddexp(0.0, x)

    def Vpp(x):
        x = np.asarray(x, dtype=float)
        return 1.0 + 1.0 / (1.0 + np.exp(-x))

    return make_potential(V, Vp, Vpp, label="softplus-blend")


class TestSubadditivity:
    def test_gaussian_equality(self, gaussian):
        for (a, b) in ((0.5, 0.5), (0.3, 0.7), (1.0, 1.0), (1.5, 0.6)):
            rep = vprime_subadditive(gaussian, WeightPair(a, b))
            assert rep.passed
            # linear V' makes both sides differ by tau (a+b-1) = exact equality at a+b=1
            if abs(a + b - 1.0) < 1e-12:
                assert abs(rep.worst_margin) <= 1e-12

    def test_shifted_gaussian_passes_on_parabolic_boundary(self):
        pot = gaussian_potential(mean=1.3)
        rep = vprime_subadditive(pot, WeightPair(0.4, 0.6))
        assert rep.passed
        assert abs(rep.worst_margin) <= 1e-12

    def test_quartic_fails_with_direct_substitution_point(self, quartic):
        rep = vprime_subadditive(quartic, WeightPair(0.5, 0.5))
        assert not rep.passed
        assert rep.violations > 0
        # the (x, y) = (-2, 0) point: V'(-1) = -1 vs (V'(-2)+V'(0))/2 = -4
        assert subadditivity_margin_at(quartic, WeightPair(0.5, 0.5), -2.0, 0.0) \
            == pytest.approx(-3.0, abs=1e-12)

    def test_quartic_global_witness_location(self, quartic):
        # minimize (x^3+y^3)/2 - ((x+y)/2)^3 on [-5,5]^2: the minimizer sits on
        # the y = -3x critical line at the grid boundary, (5/3, -5) up to x<->y
        rep = vprime_subadditive(quartic, WeightPair(0.5, 0.5))
        wx, wy = sorted(rep.witness)
        assert wx == pytest.approx(-5.0, abs=0.06)
        assert wy == pytest.approx(5.0 / 3.0, abs=0.06)
        assert rep.worst_margin == pytest.approx(-12.0 * (5.0 / 3.0) ** 3, rel=0.05)

    def test_grid_outside_support_rejected(self):
        pot = make_potential(lambda x: np.asarray(x) ** 2 / 2, lambda x: np.asarray(x),
                             lambda x: np.ones_like(np.asarray(x, float)),
                             support=(-4.0, 4.0), label="windowed")
        with pytest.raises(DomainError):
            vprime_subadditive(pot, WeightPair(0.5, 0.5), grid=(-5.0, 5.0, 11))


class TestConvexityAndSlopes:
    def test_gaussian_unit_slopes(self, gaussian):
        convex, c_minus, c_plus, witness = vprime_convexity_and_slopes(gaussian)
        assert convex and witness is None
        assert c_minus == pytest.approx(1.0, abs=1e-9)
        assert c_plus == pytest.approx(1.0, abs=1e-9)

    def test_softplus_blend_slopes(self):
        pot = softplus_blend_potential()
        convex, c_minus, c_plus, _ = vprime_convexity_and_slopes(pot, radius=30.0)
        assert convex
        assert c_minus == pytest.approx(1.0, abs=1e-3)
        assert c_plus == pytest.approx(2.0, abs=1e-3)
        assert c_minus <= c_plus

    def test_quartic_fails_convexity_with_negative_witness(self, quartic):
        convex, c_minus, c_plus, witness = vprime_convexity_and_slopes(quartic)
        assert not convex
        assert witness is not None and witness < 0
        assert math.isnan(c_minus) and math.isnan(c_plus)

    def test_asymptote_gate(self):
        # the softplus blend's V'(x)/x is far from settled at radius 2, so the
        # two slope windows disagree beyond the 1e-3 gate
        pot = softplus_blend_potential()
        with pytest.raises(PrecisionError):
            vprime_convexity_and_slopes(pot, radius=2.0)


class TestEvenRigidity:
    def test_gaussian_zero(self, gaussian):
        assert even_rigidity_check(gaussian) <= 1e-10

    def test_quartic_scale(self, quartic):
        dev = even_rigidity_check(quartic)
        assert dev == pytest.approx(3.0 * 25.0, rel=1e-6)  # V'' = 3 x^2 at x = 5

    def test_near_gaussian_cosine(self):
        pot = make_potential(lambda x: x ** 2 / 2 + 1e-3 * np.cos(x),
                             lambda x: x - 1e-3 * np.sin(x),
                             lambda x: 1.0 - 1e-3 * np.cos(x),
                             label="near-gaussian")
        dev = even_rigidity_check(pot)
        assert dev == pytest.approx(2e-3, rel=1e-3)

    def test_odd_part_rejected(self):
        pot = gaussian_potential(mean=0.5)
        with pytest.raises(PreconditionError):
            even_rigidity_check(pot)


class TestIsoperimetricProfile:
    def test_gaussian_median_value(self, gaussian):
        assert isoperimetric_profile(gaussian, 0.5) == pytest.approx(
            1.0 / math.sqrt(2 * math.pi), abs=1e-7)

    def test_even_symmetry(self, quartic):
        for p in np.arange(0.1, 0.95, 0.1):
            left = isoperimetric_profile(quartic, float(p))
            right = isoperimetric_profile(quartic, float(1 - p))
            assert left == pytest.approx(right, rel=1e-6)

    def test_vanishes_in_the_tail(self, gaussian):
        assert isoperimetric_profile(gaussian, 1e-4) < isoperimetric_profile(gaussian, 1e-3)
        assert isoperimetric_profile(gaussian, 1e-4) < 1e-3

    def test_domain_gate(self, gaussian):
        with pytest.raises(DomainError):
            isoperimetric_profile(gaussian, 1.5)


class TestEpigraphAndAudit:
    def test_gaussian_epigraph_rays(self, gaussian):
        assert epigraph_ray_check(gaussian)

    def test_quartic_epigraph_fails(self, quartic):
        # s V'(x) = s x^3 < s^3 x^3 = V'(s x) for x > 0, s > 1: the ray exits
        # the epigraph, matching the subadditivity failure
        assert not epigraph_ray_check(quartic)

    def test_audit_gaussian_passes(self, gaussian):
        audit = audit_measure(gaussian)
        assert audit.passed
        assert audit.rigidity <= 1e-10
        assert audit.note == "necessary conditions only"
        assert audit.convexity["c_minus"] == pytest.approx(1.0, abs=1e-6)

    def test_audit_quartic_fails(self, quartic):
        audit = audit_measure(quartic)
        assert not audit.passed

    def test_slope_consistency_with_rigidity(self, gaussian):
        # c+ == c- goes with rigidity 0 on the Gaussian fixture
        convex, c_minus, c_plus, _ = vprime_convexity_and_slopes(gaussian)
        assert abs(c_plus - c_minus) <= 1e-9
        assert even_rigidity_check(gaussian) <= 1e-10


class TestPotentialValidation:
    def test_inconsistent_second_derivative_rejected(self):
        with pytest.raises(ParameterError):
            make_potential(lambda x: x ** 2 / 2, lambda x: x,
                           lambda x: np.full_like(np.asarray(x, float), 2.0))

    def test_normalization_recorded(self, gaussian):
        # V = x^2/2 has mass sqrt(2 pi); the log-norm absorbs it
        assert gaussian.log_norm == pytest.approx(0.5 * math.log(2 * math.pi), abs=1e-9)
