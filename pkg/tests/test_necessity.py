"""Necessity machinery: clamp geometry, the quadratic envelope's closed form
against dense-grid brute force, the weight-form test, counterexample search."""

import math

import numpy as np
import pytest

from ehrhard_lab import fixtures
from ehrhard_lab.errors import HalfPlaneError, ParameterError
from ehrhard_lab.gaussian import general_gaussian, standard_gaussian
from ehrhard_lab.necessity import (Counterexample, HDerivs, PerturbationParams,
                                   argmax_x0, choose_delta, clamp_phi,
                                   counterexample_search, delta_condition_holds,
                                   half_plane_margin, mean_constraint_check,
                                   perturbed_pair, psi_closed_form,
                                   quad_form_necessity)
from ehrhard_lab.pdi import WeightPair, pdi_value
from ehrhard_lab.supconv import gap_scale, inequality_gap
from ehrhard_lab.surfaces import (make_ehrhard, make_neg_quartic, make_pl_family,
                                  make_power, make_young)

LINEAR = HDerivs(u=0.0, v=0.0, hu=1.0, hv=1.0, huu=0.0, huv=0.0, hvv=0.0)


def brute_force_envelope(d: HDerivs, p: float, q: float, t: float, eps: float,
                         delta: float, alpha: float = 0.32, n: int = 2_000_001):
    """Dense-grid maximization of the clamped quadratic w(x, t-x).

    Scans the mid-band [t - eps^-alpha, eps^-alpha]; outside it the clamped
    form tends to the (negative) plateau values, so the band contains the
    maximum whenever |t| is small relative to eps^-alpha.
    """
    cap = eps ** (-alpha)
    xs = np.linspace(t - cap, cap, n)
    phi_x = np.clip(xs, -delta * cap, cap)
    phi_y = np.clip(t - xs, -delta * cap, cap)
    vals = ((d.A + p) * phi_x ** 2 + 2 * d.G * phi_x * phi_y + (d.B + q) * phi_y ** 2)
    k = int(np.argmax(vals))
    return float(vals[k]), float(xs[k]), (xs[1] - xs[0])


def random_admissible_draw(rng):
    """(derivs, p, q, t) with the half-plane and delta conditions holding."""
    surfaces = [make_pl_family(0.4, "classic"), make_young(2.0, 2.0),
                make_power(0.3, 0.7), make_ehrhard(0.45, 0.55)]
    while True:
        h = surfaces[rng.integers(len(surfaces))]
        x0, x1, y0, y1 = h.domain
        u = rng.uniform(x0 + 0.3 * (x1 - x0), x1 - 0.3 * (x1 - x0))
        v = rng.uniform(y0 + 0.3 * (y1 - y0), y1 - 0.3 * (y1 - y0))
        d = HDerivs.at(h, u, v)
        base = abs(d.A) + 2 * abs(d.G) + abs(d.B) + 1.0
        p = -rng.uniform(1.0, 4.0) * base
        q = -rng.uniform(1.0, 4.0) * base
        if half_plane_margin(d, p, q) < -0.1:
            t = rng.uniform(-1.5, 1.5)
            return d, p, q, t


class TestClampPhi:
    def test_identity_in_band(self):
        assert clamp_phi(0.0, 0.01, 2.0) == 0.0
        assert clamp_phi(3.0, 0.01, 2.0) == 3.0

    def test_upper_clamp(self):
        eps, alpha = 0.01, 0.32
        cap = eps ** (-alpha)
        assert clamp_phi(2 * cap, eps, 2.0, alpha) == cap

    def test_lower_clamp(self):
        eps, alpha, delta = 0.01, 0.32, 2.0
        cap = eps ** (-alpha)
        assert clamp_phi(-2 * delta * cap, eps, delta, alpha) == -delta * cap

    def test_gates(self):
        with pytest.raises(ParameterError):
            clamp_phi(0.0, 0.01, 0.9)
        with pytest.raises(ParameterError):
            clamp_phi(0.0, 0.01, 2.0, alpha=0.5)


class TestPsiClosedForm:
    def test_linear_surface_reduction(self):
        # K = pq/(p+q): p = q = -1, t = 2 gives -2
        val = float(psi_closed_form(LINEAR, -1.0, -1.0, 2.0))
        assert val == pytest.approx(-2.0, abs=1e-14)

    def test_zero_at_origin(self):
        assert float(psi_closed_form(LINEAR, -1.0, -2.0, 0.0)) == 0.0

    def test_half_plane_violation(self):
        with pytest.raises(HalfPlaneError):
            psi_closed_form(LINEAR, 1.0, 1.0, 1.0)

    def test_matches_brute_force_on_random_draws(self):
        rng = np.random.default_rng(20)
        for _ in range(20):
            d, p, q, t = random_admissible_draw(rng)
            delta = choose_delta(d, p, q)
            closed = float(psi_closed_form(d, p, q, t))
            brute, argmax, step = brute_force_envelope(d, p, q, t, eps=0.01, delta=delta)
            assert closed == pytest.approx(brute, abs=1e-6)


class TestArgmaxX0:
    def test_linear_symmetric(self):
        # p = q < 0: w = p x^2 + p (t-x)^2 peaks at x = t/2 = q t / (p + q)
        assert argmax_x0(LINEAR, -1.0, -1.0, 2.0) == pytest.approx(1.0, abs=1e-14)

    def test_zero_at_origin(self):
        assert argmax_x0(LINEAR, -1.0, -2.0, 0.0) == 0.0

    def test_matches_brute_force_argmax(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            d, p, q, t = random_admissible_draw(rng)
            delta = choose_delta(d, p, q)
            x0 = argmax_x0(d, p, q, t)
            _, brute_x, step = brute_force_envelope(d, p, q, t, eps=0.01, delta=delta)
            assert abs(x0 - brute_x) <= step + 1e-12


class TestQuadFormNecessity:
    def test_linear_arithmetic(self):
        # K = -1/2 >= -(a^2 + b^2) for every a + b = 1 pair
        for a in (0.2, 0.5, 0.8):
            assert quad_form_necessity(LINEAR, WeightPair(a, 1 - a), -1.0, -1.0)

    def test_ehrhard_always_passes(self):
        h = make_ehrhard(0.5, 0.5)
        d = HDerivs.at(h, 0.5, 0.5)
        rng = np.random.default_rng(22)
        for _ in range(100):
            p = -rng.uniform(0.5, 20.0)
            q = -rng.uniform(0.5, 20.0)
            if half_plane_margin(d, p, q) >= 0:
                continue
            assert quad_form_necessity(d, WeightPair(0.5, 0.5), p, q)

    def test_pdi_violator_fails_somewhere(self):
        h = make_power(0.3, 0.3)
        d = HDerivs.at(h, 1.0, 1.0)
        w = WeightPair(0.5, 0.5)
        found = False
        for s in (-2.0, -5.0, -10.0, -20.0):
            if half_plane_margin(d, s, s) < 0 and not quad_form_necessity(d, w, s, s):
                found = True
                break
        assert found


class TestPerturbedPair:
    def test_zero_eps_is_constant(self):
        h = make_pl_family(0.5, "classic")
        d = HDerivs.at(h, 1.0, 1.0)
        # eps must be > 0 by contract; near-zero eps approaches the constants
        params = PerturbationParams(u=1.0, v=1.0, p=-2.0, q=-2.0, eps=1e-6,
                                    delta=choose_delta(d, -2.0, -2.0))
        f, g = perturbed_pair(h, params, WeightPair(0.5, 0.5))
        assert np.max(np.abs(f.values - 1.0)) <= 2e-4
        assert float(f(0.0)) == pytest.approx(1.0, abs=1e-12)  # phi(0) = 0

    def test_clamp_band_bound(self):
        h = make_pl_family(0.5, "classic")
        d = HDerivs.at(h, 1.0, 1.0)
        eps, alpha = 1e-2, 0.32
        delta = choose_delta(d, -2.0, -2.0)
        params = PerturbationParams(u=1.0, v=1.0, p=-2.0, q=-2.0, eps=eps,
                                    delta=delta, alpha=alpha)
        f, _ = perturbed_pair(h, params, WeightPair(0.5, 0.5))
        hu = float(h.grad(1.0, 1.0)[0])
        band = delta * eps ** (1 - alpha) * (1 + 2.0 * delta * eps ** (1 - alpha)) / abs(hu)
        assert np.max(np.abs(f.values - 1.0)) <= band * (1 + 1e-9)

    def test_image_escape_advises_smaller_eps(self):
        h = make_ehrhard(0.5, 0.5)  # tight domain [0.02, 0.98]
        d = HDerivs.at(h, 0.5, 0.5)
        delta = choose_delta(d, -3.0, -3.0)
        with pytest.raises(ParameterError, match="eps"):
            perturbed_pair(h, PerturbationParams(u=0.5, v=0.5, p=-3.0, q=-3.0,
                                                 eps=0.3, delta=delta),
                           WeightPair(0.5, 0.5))


class TestMeanConstraint:
    def test_standard_gaussian_elliptic(self):
        assert mean_constraint_check(standard_gaussian(1), WeightPair(1.0, 1.0))

    def test_shifted_gaussian_fails_when_sum_exceeds_one(self):
        m = general_gaussian(np.array([[0.5]]), np.array([1.0]))  # mean 1
        assert not mean_constraint_check(m, WeightPair(1.0, 1.0))

    def test_shifted_gaussian_unconstrained_on_parabolic_boundary(self):
        m = general_gaussian(np.array([[0.5]]), np.array([1.0]))
        assert mean_constraint_check(m, WeightPair(0.5, 0.5))


class TestCounterexampleSearch:
    def test_power_law_perturbative(self):
        ce = counterexample_search(make_power(0.3, 0.3), WeightPair(0.5, 0.5),
                                   family="perturbative", budget=100000, seed=1)
        assert ce is not None
        assert ce.result.gap < -1e-4 * gap_scale(make_power(0.3, 0.3), ce.f, ce.g)
        assert ce.evaluations <= 100000

    def test_step_family_neg_quartic(self):
        h = make_neg_quartic()
        ce = counterexample_search(h, WeightPair(0.5, 0.5), family="step",
                                   budget=100000, seed=1)
        assert ce is not None
        assert ce.family == "step"

    def test_pl_finds_nothing(self):
        h = make_pl_family(0.5, "classic")
        for family in ("perturbative", "step", "random"):
            assert counterexample_search(h, WeightPair(0.5, 0.5), family=family,
                                         budget=200, seed=3) is None

    def test_reported_gap_reproducible(self):
        h = make_young(2.4, 2.4)
        w = WeightPair(0.5, 0.5)
        ce = counterexample_search(h, w, family="perturbative", budget=100000, seed=1)
        assert ce is not None
        replay = inequality_gap(h, ce.f, ce.g, w)
        assert replay.gap == pytest.approx(ce.result.gap,
                                           abs=max(1e-12, 4 * replay.quadrature_error))

    def test_budget_gate(self):
        with pytest.raises(ParameterError):
            counterexample_search(make_power(0.3, 0.3), WeightPair(0.5, 0.5), budget=0)


class TestEpsilonOrderBookkeeping:
    def test_gap_scales_quadratically_in_eps(self):
        """gap ~ eps^2 beta (K - p a^2 - q b^2): Richardson slope of log|gap|
        against log eps stays above 2 - 0.1 over a dyadic eps ladder.

        The grid window must cover the full clamp band +-delta eps^-alpha or
        the test pair silently truncates; a small delta cap keeps the image
        inside the domain at the largest eps.
        """
        h = make_young(2.4, 2.4)
        w = WeightPair(0.5, 0.5)
        u = v = 1.0
        alpha = 0.32
        d = HDerivs.at(h, u, v)
        p = q = -3.0 * (abs(d.A) + 2 * abs(d.G) + abs(d.B) + 1.0)
        assert half_plane_margin(d, p, q) < 0
        delta = choose_delta(d, p, q, cap=1.5)
        eps_ladder = (1e-2, 5e-3, 2.5e-3)
        gaps = []
        for eps in eps_ladder:
            span = 1.1 * (delta + 1.0) * eps ** (-alpha) / min(w.a, w.b) + 8.0
            params = PerturbationParams(u=u, v=v, p=p, q=q, eps=eps, delta=delta,
                                        alpha=alpha)
            f, g = perturbed_pair(h, params, w, grid=(-span, span, 20001))
            gaps.append(inequality_gap(h, f, g, w, nodes=320).gap)
        slopes = [math.log(abs(gaps[i]) / abs(gaps[i + 1]))
                  / math.log(eps_ladder[i] / eps_ladder[i + 1]) for i in range(2)]
        assert all(s > 2.0 - 0.1 for s in slopes), (gaps, slopes)
        # the gap's true eps^2 coefficient carries the Taylor 1/2 on the pure
        # second-derivative ratios (the envelope's displayed form doubles
        # them; the PDI conclusion is insensitive to that normalization)
        from dataclasses import replace
        d_half = replace(d, huu=d.huu / 2, huv=d.huv / 2, hvv=d.hvv / 2)
        predicted = float(psi_closed_form(d_half, p, q, 1.0)) - p * w.a ** 2 - q * w.b ** 2
        # beta = 1 for the standard Gaussian; leading coefficient matches
        assert gaps[0] / eps_ladder[0] ** 2 == pytest.approx(predicted, rel=0.05)
