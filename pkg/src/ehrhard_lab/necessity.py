"""Necessity machinery: clamped perturbations, the quadratic-form envelope and
its closed form, the weight-form test, and counterexample search.

The perturbation family expands the inequality around a base point (u, v):

    f(x) = u + eps phi(a x)/H_u + eps^2 p phi^2(a x)/H_u
    g(y) = v + eps phi(b y)/H_v + eps^2 q phi^2(b y)/H_v

with phi the clamp  phi(t) = max(-delta eps^-alpha, min(t, eps^-alpha)).
For admissible (p, q) the order-eps^2 envelope is the quadratic K(p, q) t^2
whose coefficient must dominate p a^2 + q b^2 when the inequality holds; a
surface violating the PDI admits (p, q) where it does not, which the search
turns into an explicit violating pair (f, g).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import HalfPlaneError, ParameterError
from .gaussian import MeasureSpec, measure_mean_and_variance, measure_median, standard_gaussian
from .pdi import WeightPair
from .supconv import GapResult, GridFunction, gap_scale, inequality_gap
from .surfaces import SurfaceH


@dataclass(frozen=True)
class HDerivs:
    """First and second partials of H at the base point (u, v)."""

    u: float
    v: float
    hu: float
    hv: float
    huu: float
    huv: float
    hvv: float

    @classmethod
    def at(cls, h: SurfaceH, u: float, v: float) -> "HDerivs":
        hu, hv = (float(t) for t in h.grad(u, v))
        huu, huv, hvv = (float(t) for t in h.hess(u, v))
        return cls(u=u, v=v, hu=hu, hv=hv, huu=huu, huv=huv, hvv=hvv)

    # normalized second-derivative ratios used throughout the closed forms
    @property
    def A(self) -> float:
        return self.huu / self.hu ** 2

    @property
    def G(self) -> float:
        return self.huv / (self.hu * self.hv)

    @property
    def B(self) -> float:
        return self.hvv / self.hv ** 2


def half_plane_margin(d: HDerivs, p: float, q: float) -> float:
    """p + q + A - 2G + B; admissible (p, q) keep this strictly negative."""
    return p + q + d.A - 2.0 * d.G + d.B


@dataclass(frozen=True)
class PerturbationParams:
    """Base point, quadratic coefficients and clamp geometry of one candidate."""

    u: float
    v: float
    p: float
    q: float
    eps: float
    delta: float
    alpha: float = 0.32

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0 / 3.0):
            raise ParameterError(f"alpha must lie in (0, 1/3), got {self.alpha}")
        if not self.delta > 1.0:
            raise ParameterError(f"delta must exceed 1, got {self.delta}")
        if not (0.0 < self.eps < 1.0):
            raise ParameterError(f"eps must lie in (0, 1), got {self.eps}")


def clamp_phi(t, eps: float, delta: float, alpha: float = 0.32):
    """The clamp: -delta eps^-alpha below, identity in the band, eps^-alpha above."""
    if not (0.0 < eps < 1.0 and delta > 1.0 and 0.0 < alpha < 1.0 / 3.0):
        raise ParameterError(f"need eps in (0,1), delta > 1, alpha in (0,1/3); got {(eps, delta, alpha)}")
    cap = eps ** (-alpha)
    return np.clip(np.asarray(t, dtype=float), -delta * cap, cap)


def delta_condition_holds(d: HDerivs, p: float, q: float, delta: float) -> bool:
    """Whether (p+A)s^2 - 2Gs + (q+B) < 0 for every s in [1/delta, delta]."""
    lead = p + d.A
    const = q + d.B

    def val(s: float) -> float:
        return lead * s * s - 2.0 * d.G * s + const

    pts = [1.0 / delta, delta]
    if lead < 0.0:
        s_star = d.G / lead
        if 1.0 / delta <= s_star <= delta:
            pts.append(s_star)
    return max(val(s) for s in pts) < 0.0


def choose_delta(d: HDerivs, p: float, q: float, cap: float = 10.0) -> float:
    """Largest delta <= cap satisfying the interval condition, by bisection.

    Existence of some delta > 1 follows from the half-plane condition by
    continuity; raises HalfPlaneError when even that fails.
    """
    if half_plane_margin(d, p, q) >= 0.0:
        raise HalfPlaneError(f"(p, q)=({p}, {q}) violate the half-plane condition")
    if delta_condition_holds(d, p, q, cap):
        return cap
    lo, hi = 1.0, cap
    # lo valid in the limit; grow a strictly valid lower endpoint first
    lo_valid = None
    step = 1e-3
    while step < 1.0:
        if delta_condition_holds(d, p, q, 1.0 + step):
            lo_valid = 1.0 + step
            break
        step /= 4.0
    if lo_valid is None:
        raise HalfPlaneError("no delta > 1 satisfies the interval condition")
    lo = lo_valid
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if delta_condition_holds(d, p, q, mid):
            lo = mid
        else:
            hi = mid
    return lo


def psi_closed_form(d: HDerivs, p: float, q: float, t) -> np.ndarray:
    """The order-eps^2 envelope K t^2.

        K = [p B + p q + q A + (A B - G^2)] / [A + p - 2 G + B + q]

    with A = H_uu/H_u^2, G = H_uv/(H_u H_v), B = H_vv/H_v^2.  Requires the
    half-plane condition (denominator < 0).
    """
    denom = half_plane_margin(d, p, q)
    if denom >= 0.0:
        raise HalfPlaneError(f"half-plane condition fails: denominator {denom} >= 0")
    num = p * d.B + p * q + q * d.A + (d.A * d.B - d.G ** 2)
    return (num / denom) * np.asarray(t, dtype=float) ** 2


def argmax_x0(d: HDerivs, p: float, q: float, t: float) -> float:
    """Maximizer of the mid-band quadratic w(x, t - x).

        x0 = -(G - B - q) t / (A + p - 2G + B + q)

    (q rides with B throughout w, so it enters the numerator as -(B + q);
    the same stationary point reproduces the K t^2 supremum).
    """
    denom = half_plane_margin(d, p, q)
    if denom >= 0.0:
        raise HalfPlaneError(f"half-plane condition fails: denominator {denom} >= 0")
    return -(d.G - d.B - q) * t / denom


def quad_form_necessity(d: HDerivs, w: WeightPair, p: float, q: float) -> bool:
    """The first-form necessity test: K(p, q) >= p a^2 + q b^2."""
    kval = float(psi_closed_form(d, p, q, 1.0))
    return kval >= p * w.a ** 2 + q * w.b ** 2


def perturbed_pair(h: SurfaceH, params: PerturbationParams, w: WeightPair,
                   grid: tuple[float, float, int] = (-8.0, 8.0, 4001)) -> tuple[GridFunction, GridFunction]:
    """The clamped test-function pair for one parameter set.

    Raises ParameterError (advising a smaller eps) when the image escapes the
    surface's domain at this eps.
    """
    d = HDerivs.at(h, params.u, params.v)
    if half_plane_margin(d, params.p, params.q) >= 0.0:
        raise HalfPlaneError("(p, q) violate the half-plane condition at the base point")
    if not delta_condition_holds(d, params.p, params.q, params.delta):
        raise ParameterError(f"delta={params.delta} violates the interval condition")

    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    eps, alpha, delta = params.eps, params.alpha, params.delta

    phi_f = clamp_phi(w.a * xs, eps, delta, alpha)
    phi_g = clamp_phi(w.b * xs, eps, delta, alpha)
    fvals = params.u + eps * phi_f / d.hu + eps ** 2 * params.p * phi_f ** 2 / d.hu
    gvals = params.v + eps * phi_g / d.hv + eps ** 2 * params.q * phi_g ** 2 / d.hv

    x0, x1, y0, y1 = h.domain
    if np.min(fvals) < x0 or np.max(fvals) > x1 or np.min(gvals) < y0 or np.max(gvals) > y1:
        raise ParameterError(
            f"perturbation image escapes the domain at eps={eps}; shrink eps")
    f = GridFunction(lo, hi, fvals, (float(np.min(fvals)), float(np.max(fvals))))
    g = GridFunction(lo, hi, gvals, (float(np.min(gvals)), float(np.max(gvals))))
    return f, g


def mean_constraint_check(measure: MeasureSpec, w: WeightPair, tol: float = 1e-8) -> bool:
    """Zero-mean necessity: binding only when a + b > 1."""
    if w.a + w.b <= 1.0 + 1e-12:
        return True
    tau, _ = measure_mean_and_variance(measure)
    return abs(tau) <= tol


@dataclass
class Counterexample:
    """A violating pair with its verified gap."""

    f: GridFunction
    g: GridFunction
    result: GapResult
    family: str
    params: dict
    evaluations: int


def _candidate_pq(d: HDerivs, w: WeightPair) -> list[tuple[float, float]]:
    """Admissible (p, q) candidates biased toward the violating directions."""
    base = -max(1.0, abs(d.A) + abs(d.B) + 2 * abs(d.G))
    out = []
    for scale in (1.0, 3.0, 9.0, 27.0):
        s = base * scale
        for px, qx in ((1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (4.0, 1.0), (1.0, 4.0)):
            p, q = s * px, s * qx
            if half_plane_margin(d, p, q) < 0.0:
                out.append((p, q))
    return out


def _perturbative_candidates(h: SurfaceH, w: WeightPair, rng: np.random.Generator):
    x0, x1, y0, y1 = h.domain
    fracs = (0.1, 0.25, 0.5, 0.75)
    bases = [(x0 + fx * (x1 - x0), y0 + fy * (y1 - y0)) for fx in fracs for fy in fracs]
    bases += [(rng.uniform(x0 + 0.05 * (x1 - x0), x1 - 0.05 * (x1 - x0)),
               rng.uniform(y0 + 0.05 * (y1 - y0), y1 - 0.05 * (y1 - y0)))
              for _ in range(4)]
    # rank every (base, p, q) by predicted violation relative to the local |H|
    # scale (the gap threshold is scale-relative, so deep-violation small-|H|
    # base points dominate)
    scored = []
    for (u, v) in bases:
        hval = float(h.eval(u, v))
        d = HDerivs.at(h, u, v)
        if abs(d.hu) < 1e-9 or abs(d.hv) < 1e-9:
            continue
        for (p, q) in _candidate_pq(d, w):
            kval = float(psi_closed_form(d, p, q, 1.0))
            margin = kval - p * w.a ** 2 - q * w.b ** 2
            if margin >= 0.0:
                continue
            scored.append((margin / max(abs(hval), 1e-12), u, v, p, q))
    scored.sort()
    for rel_margin, u, v, p, q in scored:
        d = HDerivs.at(h, u, v)
        try:
            delta = choose_delta(d, p, q)
        except HalfPlaneError:
            continue
        for eps in (0.15, 0.1, 0.07, 0.05, 0.03, 0.02, 0.01, 0.005):
            try:
                params = PerturbationParams(u=u, v=v, p=p, q=q, eps=eps, delta=delta)
                f, g = perturbed_pair(h, params, w)
            except ParameterError:
                continue
            yield f, g, {"family": "perturbative", "u": u, "v": v, "p": p, "q": q,
                         "eps": eps, "delta": delta,
                         "predicted": rel_margin * eps ** 2}


def _step_candidates(h: SurfaceH, w: WeightPair, measure: MeasureSpec,
                     grid: tuple[float, float, int] = (-8.0, 8.0, 4001)):
    x0, x1, y0, y1 = h.domain
    med = measure_median(measure)
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    step = np.where(xs <= med, -1.0, 1.0)
    bases = [(0.5 * (x0 + x1), 0.5 * (y0 + y1)),
             (0.25 * x0 + 0.75 * x1, 0.5 * (y0 + y1)),
             (0.5 * (x0 + x1), 0.25 * y0 + 0.75 * y1)]
    span = 0.49 * min(x1 - x0, y1 - y0)
    for (u, v) in bases:
        for eps_frac in (0.9, 0.5, 0.2, 0.05):
            eps = eps_frac * span
            for mode in ("f_only", "g_only", "both", "anti"):
                fvals = u + (eps * step if mode in ("f_only", "both", "anti") else np.zeros_like(xs))
                gsign = -1.0 if mode == "anti" else 1.0
                gvals = v + (gsign * eps * step if mode in ("g_only", "both", "anti") else np.zeros_like(xs))
                if np.min(fvals) < x0 or np.max(fvals) > x1 or np.min(gvals) < y0 or np.max(gvals) > y1:
                    continue
                f = GridFunction(lo, hi, fvals, (float(np.min(fvals)), float(np.max(fvals))))
                g = GridFunction(lo, hi, gvals, (float(np.min(gvals)), float(np.max(gvals))))
                yield f, g, {"family": "step", "u": u, "v": v, "eps": eps, "mode": mode,
                             "median": med}


def _random_candidates(h: SurfaceH, w: WeightPair, rng: np.random.Generator,
                       grid: tuple[float, float, int] = (-8.0, 8.0, 4001)):
    x0, x1, y0, y1 = h.domain
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    while True:
        def bumps():
            k = rng.integers(1, 4)
            out = np.zeros_like(xs)
            for _ in range(k):
                c = rng.uniform(-3, 3)
                s = rng.uniform(0.3, 2.0)
                out += rng.uniform(-1, 1) * np.exp(-((xs - c) / s) ** 2)
            return out

        fb, gb = bumps(), bumps()

        def into(lo_r, hi_r, z):
            zmin, zmax = float(np.min(z)), float(np.max(z))
            if zmax - zmin < 1e-12:
                return np.full_like(z, 0.5 * (lo_r + hi_r))
            mid, half = 0.5 * (lo_r + hi_r), 0.45 * (hi_r - lo_r)
            return mid + half * (2 * (z - zmin) / (zmax - zmin) - 1.0)

        fvals = into(x0, x1, fb)
        gvals = into(y0, y1, gb)
        f = GridFunction(lo, hi, fvals, (float(np.min(fvals)), float(np.max(fvals))))
        g = GridFunction(lo, hi, gvals, (float(np.min(gvals)), float(np.max(gvals))))
        yield f, g, {"family": "random"}


def counterexample_search(h: SurfaceH, w: WeightPair,
                          measure: Optional[MeasureSpec] = None,
                          budget: int = 100000,
                          family: str = "perturbative",
                          threshold_scale: float = 1e-4,
                          seed: int = 0,
                          search_nodes: int = 48) -> Optional[Counterexample]:
    """First (f, g) with gap < -threshold_scale * scale, or None.

    Candidates are screened at an economy quadrature resolution (each screen
    counts against the budget) and a hit is re-verified at the default
    resolution before being reported, so the returned gap is one
    inequality_gap reproduces.
    """
    if budget < 1:
        raise ParameterError(f"budget must be >= 1, got {budget}")
    if measure is None:
        measure = standard_gaussian(1)
    rng = np.random.default_rng(seed)
    if family == "perturbative":
        gen = _perturbative_candidates(h, w, rng)
    elif family == "step":
        gen = _step_candidates(h, w, measure)
    elif family == "random":
        gen = _random_candidates(h, w, rng)
    else:
        raise ParameterError(f"unknown search family {family!r}")

    evaluations = 0
    for f, g, params in gen:
        if evaluations >= budget:
            break
        evaluations += 1
        res = inequality_gap(h, f, g, w, measure, nodes=search_nodes)
        scale = gap_scale(h, f, g)
        if res.gap < -threshold_scale * scale:
            verified = inequality_gap(h, f, g, w, measure)
            if verified.gap < -threshold_scale * scale:
                return Counterexample(f=f, g=g, result=verified, family=params["family"],
                                      params=params, evaluations=evaluations)
    return None
