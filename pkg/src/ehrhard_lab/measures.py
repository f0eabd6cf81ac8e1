"""Audits a line measure e^{-V} for the distribution-composition inequality.

Necessary conditions checked (the audit never claims sufficiency):

* derivative subadditivity  V'(ax + by) <= a V'(x) + b V'(y) on a grid,
* convexity of V' with linear asymptotes V'(x) ~ c± x at ±infinity,
* for even measures, the rigidity V'' = V''(0) that pins the Gaussian,
* the epigraph geometry s (x, V'(x)) staying inside epi V' for s >= 1.

The isoperimetric profile of the measure's own distribution, phi(Phi^-1(p)),
is exposed for comparisons against the Gaussian profile.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ParameterError, PrecisionError, PreconditionError
from .gaussian import MeasureSpec, density_measure
from .pdi import WeightPair


@dataclass(frozen=True)
class PotentialV:
    """A potential V with first two derivatives and the induced measure.

    The normalization constant is absorbed into log_norm: the probability
    density is exp(-V(x) - log_norm).  V'' must be consistent with V' (the
    constructor spot-checks finite differences).
    """

    V: Callable
    Vp: Callable
    Vpp: Callable
    measure: MeasureSpec
    label: str = ""
    support: tuple[float, float] = (-math.inf, math.inf)

    @property
    def log_norm(self) -> float:
        return self.measure.log_norm

    def density(self, x):
        return np.exp(-np.asarray(self.V(np.asarray(x, dtype=float))) - self.log_norm)


def make_potential(V: Callable, Vp: Callable, Vpp: Callable, label: str = "",
                   support: tuple[float, float] = (-math.inf, math.inf),
                   check: bool = True) -> PotentialV:
    """Build and validate a PotentialV (normalization + derivative consistency).

    `support` is the potential's mathematical domain; the measure's own
    support field records the truncated quadrature interval instead.
    """
    measure = density_measure(V, Vp, Vpp, support=support)
    pot = PotentialV(V=V, Vp=Vp, Vpp=Vpp, measure=measure, label=label, support=support)
    if check:
        xs = np.linspace(-3.0, 3.0, 25)
        h = 1e-4
        fd = (np.asarray(Vp(xs + h)) - np.asarray(Vp(xs - h))) / (2 * h)
        vpp = np.asarray(Vpp(xs))
        scale = np.maximum(np.abs(vpp), 1.0)
        if np.max(np.abs(fd - vpp) / scale) > 1e-5:
            raise ParameterError("V'' disagrees with finite differences of V'")
    return pot


def gaussian_potential(mean: float = 0.0, var: float = 1.0) -> PotentialV:
    def V(x):
        return (x - mean) ** 2 / (2 * var)

    def Vp(x):
        return (x - mean) / var

    def Vpp(x):
        return np.full_like(np.asarray(x, dtype=float), 1.0 / var)

    return make_potential(V, Vp, Vpp, label=f"gaussian(mean={mean:g},var={var:g})")


def quartic_potential() -> PotentialV:
    """V = x^4/4: the standard subadditivity/convexity counterexample."""
    return make_potential(lambda x: x ** 4 / 4.0, lambda x: x ** 3,
                          lambda x: 3.0 * x ** 2, label="quartic")


@dataclass
class SubadditivityReport:
    """Worst margin of a V'(ax+by) <= aV'(x)+bV'(y) sweep."""

    passed: bool
    worst_margin: float
    witness: tuple[float, float]
    weights: tuple[float, float]
    samples: int
    violations: int
    scale: float
    label: str = ""
    note: str = "necessary conditions only"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def vprime_subadditive(pot: PotentialV, w: WeightPair,
                       grid: tuple[float, float, int] = (-5.0, 5.0, 201),
                       tol: float = 1e-9) -> SubadditivityReport:
    """Sweep the derivative-subadditivity margin a V'(x) + b V'(y) - V'(ax+by).

    Pass iff the worst margin stays above -tol * scale with scale the largest
    |V'| seen (unit-free thresholds).  The witness is the worst node.
    """
    lo, hi, n = grid
    s0, s1 = pot.support
    if lo < s0 or hi > s1:
        raise DomainError(f"grid [{lo}, {hi}] leaves the support [{s0}, {s1}]")
    xs = np.linspace(lo, hi, int(n))
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    vx = np.asarray(pot.Vp(X))
    vy = np.asarray(pot.Vp(Y))
    vc = np.asarray(pot.Vp(w.a * X + w.b * Y))
    margin = w.a * vx + w.b * vy - vc
    scale = max(1.0, float(np.max(np.abs(vx))))
    k = int(np.argmin(margin))
    i, j = np.unravel_index(k, margin.shape)
    worst = float(margin[i, j])
    return SubadditivityReport(passed=worst >= -tol * scale,
                               worst_margin=worst,
                               witness=(float(X[i, j]), float(Y[i, j])),
                               weights=(w.a, w.b),
                               samples=margin.size,
                               violations=int(np.sum(margin < -tol * scale)),
                               scale=scale,
                               label=pot.label)


def subadditivity_margin_at(pot: PotentialV, w: WeightPair, x: float, y: float) -> float:
    return float(w.a * pot.Vp(x) + w.b * pot.Vp(y) - pot.Vp(w.a * x + w.b * y))


def vprime_convexity_and_slopes(pot: PotentialV, radius: float = 20.0,
                                n: int = 2001) -> tuple[bool, float, float, Optional[float]]:
    """(convex, c_minus, c_plus, witness) for V' on [-radius, radius].

    Convexity means the minimum second difference of V' stays above -1e-8
    (scaled); when it fails the witness carries the worst node and the slopes
    are NaN.  Slopes are the windowed averages of V'(x)/x over [0.8R, R] and
    checked against the [0.9R, R] window at the 1e-3 gate (the limit is
    assumed reached only when the two windows agree).
    """
    xs = np.linspace(-radius, radius, n)
    vp = np.asarray(pot.Vp(xs))
    d2 = vp[2:] - 2.0 * vp[1:-1] + vp[:-2]
    scale = max(1.0, float(np.max(np.abs(vp))))
    k = int(np.argmin(d2))
    convex = bool(d2[k] >= -1e-8 * scale)
    if not convex:
        return False, math.nan, math.nan, float(xs[k + 1])

    def window_slope(side: float, frac: float) -> float:
        lo = frac * radius
        sel = np.linspace(lo, radius, 101) * side
        return float(np.mean(np.asarray(pot.Vp(sel)) / sel))

    c_plus_a, c_plus_b = window_slope(1.0, 0.8), window_slope(1.0, 0.9)
    c_minus_a, c_minus_b = window_slope(-1.0, 0.8), window_slope(-1.0, 0.9)
    if abs(c_plus_a - c_plus_b) > 1e-3 or abs(c_minus_a - c_minus_b) > 1e-3:
        raise PrecisionError(
            f"V'(x)/x windows disagree (plus: {c_plus_a} vs {c_plus_b}, "
            f"minus: {c_minus_a} vs {c_minus_b}); asymptote not reached at radius {radius}")
    return True, c_minus_b, c_plus_b, None


def even_rigidity_check(pot: PotentialV, grid: tuple[float, float, int] = (-5.0, 5.0, 201)) -> float:
    """max |V''(x) - V''(0)| over the grid; zero exactly for the Gaussian.

    Requires an even potential (V(x) = V(-x) within 1e-9 on the grid); raises
    PreconditionError with an asymmetry witness otherwise.
    """
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    asym = np.abs(np.asarray(pot.V(xs)) - np.asarray(pot.V(-xs)))
    k = int(np.argmax(asym))
    if asym[k] > 1e-9:
        raise PreconditionError(f"potential is not even: |V(x)-V(-x)|={asym[k]:.3e} at x={xs[k]:.4g}",
                                float(xs[k]))
    vpp0 = float(pot.Vpp(np.array(0.0)))
    return float(np.max(np.abs(np.asarray(pot.Vpp(xs)) - vpp0)))


def isoperimetric_profile(pot: PotentialV, p: float) -> float:
    """phi(Phi^-1(p)) for the measure's own distribution and density."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"profile needs p in (0,1), got {p}")
    lo, hi = pot.measure.support
    xs = np.linspace(lo, hi, 20001)
    dens = pot.density(xs)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(xs))])
    cdf /= cdf[-1]
    x_p = float(np.interp(p, cdf, xs))
    # one Newton step against the trapezoid cdf sharpens the quantile
    x_p -= (float(np.interp(x_p, xs, cdf)) - p) / float(pot.density(x_p))
    return float(pot.density(x_p))


def epigraph_ray_check(pot: PotentialV, scales=(1.0, 1.5, 2.0),
                       grid: tuple[float, float, int] = (-4.0, 4.0, 81)) -> bool:
    """Whether s (x, V'(x)) stays in epi V' for the given s >= 1 on the grid."""
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    vp = np.asarray(pot.Vp(xs))
    for s in scales:
        if np.any(s * vp < np.asarray(pot.Vp(s * xs)) - 1e-9):
            return False
    return True


DEFAULT_WEIGHT_SAMPLE = tuple((t, 1.0 - t) for t in np.arange(0.1, 0.95, 0.1)) + ((1.0, 1.0), (1.5, 0.6))


@dataclass
class MeasureAudit:
    """Joint report over the default weight-pair sample."""

    label: str
    subadditivity: dict = field(default_factory=dict)
    convexity: Optional[dict] = None
    rigidity: Optional[float] = None
    passed: bool = False
    note: str = "necessary conditions only"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def audit_measure(pot: PotentialV, weight_sample=DEFAULT_WEIGHT_SAMPLE) -> MeasureAudit:
    """Run every necessary-condition check; pass means no check failed."""
    audit = MeasureAudit(label=pot.label)
    ok = True
    for (a, b) in weight_sample:
        rep = vprime_subadditive(pot, WeightPair(a, b))
        audit.subadditivity[f"a={a:g},b={b:g}"] = {
            "passed": rep.passed, "worst_margin": rep.worst_margin, "witness": rep.witness}
        ok = ok and rep.passed
    try:
        convex, c_minus, c_plus, witness = vprime_convexity_and_slopes(pot)
        audit.convexity = {"convex": convex, "c_minus": c_minus, "c_plus": c_plus,
                           "witness": witness}
        ok = ok and convex
    except PrecisionError as exc:
        audit.convexity = {"convex": False, "error": str(exc)}
        ok = False
    try:
        audit.rigidity = even_rigidity_check(pot)
    except PreconditionError:
        audit.rigidity = None  # odd part present; rigidity only defined for even measures
    audit.passed = ok
    return audit
