"""Gaussian primitives: cdf/quantile against independent oracles, quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.polynomial.legendre import leggauss

from ehrhard_lab.errors import DomainError, EvaluationError, ParameterError
from ehrhard_lab.gaussian import (
    density_measure,
    general_gaussian,
    integrate,
    measure_mean_and_variance,
    measure_median,
    standard_gaussian,
    std_normal_cdf,
    std_normal_pdf,
    std_normal_quantile,
    total_mass,
)


def cdf_oracle(x: float) -> float:
    """Independent oracle: Gauss-Legendre quadrature of the density on [0, x].

    200 nodes on a smooth integrand is exact to machine precision for
    |x| <= 8; deliberately avoids erf/erfc so it cross-checks the production
    path rather than reproducing it.
    """
    nodes, weights = leggauss(200)
    t = 0.5 * x * (nodes + 1.0)
    return 0.5 + 0.5 * x * float(np.sum(weights * np.exp(-0.5 * t * t))) / math.sqrt(2 * math.pi)


class TestStdNormalCdf:
    def test_median(self):
        assert std_normal_cdf(0.0) == 0.5

    def test_reflection_identity(self):
        assert abs(std_normal_cdf(2.0) - (1.0 - std_normal_cdf(-2.0))) <= 1e-16

    def test_against_quadrature_oracle(self):
        # frozen from the oracle: cdf_oracle(1.959964) = 0.9750000516249075
        assert std_normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)
        for x in (-6.0, -3.2, -1.0, -0.1, 0.7, 2.5, 4.4, 6.0):
            assert std_normal_cdf(x) == pytest.approx(cdf_oracle(x), abs=1e-14)

    def test_strictly_increasing(self):
        # strict until the value saturates at float 1.0 (x ~ 7.9), then flat
        xs = np.linspace(-8, 7.0, 2001)
        assert np.all(np.diff(std_normal_cdf(xs)) > 0)
        tail = np.linspace(7.0, 8.0, 200)
        assert np.all(np.diff(std_normal_cdf(tail)) >= 0)

    def test_saturates_without_error(self):
        assert std_normal_cdf(50.0) == 1.0
        assert std_normal_cdf(-50.0) == 0.0


class TestStdNormalQuantile:
    def test_median(self):
        assert std_normal_quantile(0.5) == 0.0

    def test_roundtrip_through_cdf(self):
        assert std_normal_quantile(std_normal_cdf(1.3)) == pytest.approx(1.3, abs=1e-11)

    def test_value_against_oracle(self):
        assert std_normal_quantile(0.975) == pytest.approx(1.959964, abs=1e-6)

    def test_roundtrip_tolerance_band(self):
        p = np.concatenate([np.geomspace(1e-10, 0.5, 300),
                            1.0 - np.geomspace(1e-10, 0.5, 300)])
        x = std_normal_quantile(p)
        assert np.max(np.abs(std_normal_cdf(x) - p)) <= 1e-11

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.7, math.nan])
    def test_domain_error(self, bad):
        with pytest.raises(DomainError):
            std_normal_quantile(bad)

    @given(st.floats(min_value=-6.0, max_value=6.0))
    @settings(max_examples=300, deadline=None)
    def test_inverse_roundtrip_property(self, x):
        # rounding Phi(x) to a double costs up to ulp(1)/2 of probability near
        # p = 1, which back-maps to ~ulp/(2 phi(x)) of unavoidable x-error in
        # the right tail; the 1e-9 target applies wherever p resolves it
        quantization = 1.2e-16 / std_normal_pdf(x)
        tol = max(1e-9, quantization)
        assert std_normal_quantile(std_normal_cdf(x)) == pytest.approx(x, abs=tol)


class TestIntegrate:
    def test_normalization(self):
        res = integrate(lambda x: np.ones_like(x), standard_gaussian(1))
        assert res.value == pytest.approx(1.0, abs=1e-12)

    def test_unit_variance(self):
        res = integrate(lambda x: x * x, standard_gaussian(1))
        assert res.value == pytest.approx(1.0, abs=1e-10)

    def test_fourth_moment_double_factorial(self):
        # E x^{2k} = (2k-1)!!; k=2 gives 3
        res = integrate(lambda x: x ** 4, standard_gaussian(1))
        assert res.value == pytest.approx(3.0, abs=1e-9)
        assert res.error <= 1e-9

    def test_nonfinite_sample_rejected(self):
        with pytest.raises(EvaluationError):
            integrate(lambda x: 1.0 / (x - x), standard_gaussian(1))

    def test_node_floor(self):
        with pytest.raises(ParameterError):
            integrate(lambda x: x, standard_gaussian(1), nodes=1)

    @given(st.floats(-3, 3), st.floats(-3, 3))
    @settings(max_examples=60, deadline=None)
    def test_linearity(self, alpha, beta):
        m = standard_gaussian(1)
        f = lambda x: np.sin(x)
        g = lambda x: np.exp(-np.abs(x))
        combo = integrate(lambda x: alpha * f(x) + beta * g(x), m).value
        split = alpha * integrate(f, m).value + beta * integrate(g, m).value
        assert combo == pytest.approx(split, abs=1e-10)

    def test_two_dimensional_moments(self):
        m = standard_gaussian(2)
        assert total_mass(m) == pytest.approx(1.0, abs=1e-8)
        res = integrate(lambda p: p[:, 0] ** 2 * p[:, 1] ** 2, m, nodes=40)
        assert res.value == pytest.approx(1.0, abs=1e-10)


class TestMeasureSpecs:
    def test_standard_moments(self):
        tau, beta = measure_mean_and_variance(standard_gaussian(1))
        assert tau == 0.0 and beta == 1.0

    def test_general_gaussian_complete_the_square(self):
        # exp(-x^2/2 + x + c): mean = b/(2A) = 1, variance = 1/(2A) = 1
        m = general_gaussian(np.array([[0.5]]), np.array([1.0]))
        tau, beta = measure_mean_and_variance(m)
        assert tau == pytest.approx(1.0, abs=1e-12)
        assert beta == pytest.approx(2.0, abs=1e-12)  # var 1 + mean^2
        assert total_mass(m) == pytest.approx(1.0, abs=1e-9)

    def test_general_gaussian_bad_c_rejected(self):
        with pytest.raises(ParameterError):
            general_gaussian(np.array([[0.5]]), np.array([0.0]), c=0.0)

    def test_general_gaussian_spd_required(self):
        with pytest.raises(ParameterError):
            general_gaussian(np.array([[-1.0]]), np.array([0.0]))
        with pytest.raises(ParameterError):
            general_gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]), np.zeros(2))

    def test_quartic_density_even_mean_zero(self):
        m = density_measure(lambda x: x ** 4 / 4.0, lambda x: x ** 3, lambda x: 3 * x ** 2)
        tau, beta = measure_mean_and_variance(m)
        assert tau == pytest.approx(0.0, abs=1e-9)
        assert beta > 0
        assert total_mass(m) == pytest.approx(1.0, abs=1e-8)
        assert m.truncation > 0

    def test_median_of_shifted_gaussian(self):
        m = general_gaussian(np.array([[0.5]]), np.array([1.0]))
        assert measure_median(m) == pytest.approx(1.0, abs=1e-9)
