"""Finite-dimensional conditions: the PDI, weight regimes, degenerate-case
matrix tests, the sufficiency block-matrix minors, elliptic parameters, and
the homogeneous/concave classifications.

The central quantity is

    pdi_value = a^2 H_xx/H_x^2 + (1 - a^2 - b^2) H_xy/(H_x H_y) + b^2 H_yy/H_y^2,

nonnegativity of which is necessary for the sup-convolution inequality and,
for Gaussian measures, sufficient.  Weight pairs (a, b) split into regimes by
|1 - a^2 - b^2| versus 2ab (equivalently a + b >= 1 and |a - b| <= 1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import (DegeneratePointError, ParameterError, PreconditionError,
                     RegimeError)
from .surfaces import SurfaceH

PDI_TOLERANCE = 1e-9
GRAD_ZERO_THRESHOLD = 1e-10

PARABOLIC = "parabolic"
ELLIPTIC = "elliptic"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class WeightPair:
    """The coefficients (a, b) of the sup-convolution inequality.

    regime() classifies by the constraint |1 - a^2 - b^2| <= 2ab:
    equality (within 1e-12) is parabolic, strict inequality elliptic,
    violation infeasible.
    """

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ParameterError(f"weights must be strictly positive, got {(self.a, self.b)}")

    @property
    def cross(self) -> float:
        """The PDI cross coefficient 1 - a^2 - b^2."""
        return 1.0 - self.a * self.a - self.b * self.b

    def regime(self, tol: float = 1e-12) -> str:
        gap = 2.0 * self.a * self.b - abs(self.cross)
        if abs(gap) <= tol:
            return PARABOLIC
        return ELLIPTIC if gap > 0 else INFEASIBLE

    def feasible(self) -> bool:
        return self.regime() != INFEASIBLE


def weight_constraint(w: WeightPair) -> str:
    """Regime classification of a weight pair (parabolic/elliptic/infeasible)."""
    return w.regime()


@dataclass
class PDIReport:
    """Outcome of a grid sweep of the PDI over a surface."""

    min_value: float
    argmin: tuple[float, float]
    feasible: bool
    samples: int
    violations: int
    degenerate_skipped: int = 0
    tolerance: float = PDI_TOLERANCE
    surface: str = ""
    weights: tuple[float, float] = (0.0, 0.0)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _derivative_scale(h: SurfaceH) -> float:
    """Median gradient norm over a coarse domain grid; floors the ∇H=0 test."""
    X, Y = h.interior_meshgrid(17, 17, inset_frac=0.02)
    gx, gy = h.grad(X, Y)
    med = float(np.median(np.hypot(gx, gy)))
    return med if med > 0 and math.isfinite(med) else 1.0


def pdi_value(h: SurfaceH, w: WeightPair, point: tuple[float, float]):
    """The PDI expression at one interior point.

    Raises DegeneratePointError when H_x or H_y vanishes there (those points
    belong to check_degenerate).
    """
    x, y = point
    if h.grad is None or h.hess is None:
        raise ParameterError(f"surface {h.label} has no analytic partials")
    hx, hy = h.grad(x, y)
    if np.any(np.abs(hx) < 1e-300) or np.any(np.abs(hy) < 1e-300):
        raise DegeneratePointError(
            f"vanishing partial at {point}; use check_degenerate for the degenerate conditions")
    hxx, hxy, hyy = h.hess(x, y)
    return (w.a ** 2 * hxx / hx ** 2
            + w.cross * hxy / (hx * hy)
            + w.b ** 2 * hyy / hy ** 2)


def pdi_value_grid(h: SurfaceH, w: WeightPair, X, Y,
                   grad_floor: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized PDI over a meshgrid; returns (values, degenerate mask).

    Degenerate nodes (|H_x| or |H_y| below grad_floor) get NaN values and a
    True mask entry instead of raising.
    """
    hx, hy = h.grad(X, Y)
    hxx, hxy, hyy = h.hess(X, Y)
    degenerate = (np.abs(hx) <= grad_floor) | (np.abs(hy) <= grad_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = (w.a ** 2 * hxx / hx ** 2
                + w.cross * hxy / (hx * hy)
                + w.b ** 2 * hyy / hy ** 2)
    vals = np.where(degenerate, np.nan, vals)
    return vals, degenerate


def check_pdi_grid(h: SurfaceH, w: WeightPair, resolution: tuple[int, int] = (200, 200),
                   tolerance: float = PDI_TOLERANCE) -> PDIReport:
    """Evaluate the PDI on all interior nodes of a uniform grid.

    The report carries the minimum and its location; degenerate nodes are
    flagged, excluded from the minimum, and counted.
    """
    if w.regime() == INFEASIBLE:
        raise RegimeError(f"weights {(w.a, w.b)} are infeasible: |1-a^2-b^2| > 2ab")
    nx, ny = resolution
    X, Y = h.interior_meshgrid(nx, ny, inset_frac=1.0 / (max(nx, ny) + 1))
    floor = GRAD_ZERO_THRESHOLD * _derivative_scale(h)
    vals, degenerate = pdi_value_grid(h, w, X, Y, grad_floor=floor)
    good = ~degenerate & np.isfinite(vals)
    n_good = int(np.sum(good))
    if n_good == 0:
        raise DegeneratePointError("every grid node is degenerate; PDI grid check undefined")
    masked = np.where(good, vals, np.inf)
    k = int(np.argmin(masked))
    i, j = np.unravel_index(k, vals.shape)
    min_value = float(vals[i, j])
    violations = int(np.sum(masked < -tolerance))
    return PDIReport(min_value=min_value,
                     argmin=(float(X[i, j]), float(Y[i, j])),
                     feasible=min_value >= -tolerance,
                     samples=n_good,
                     violations=violations,
                     degenerate_skipped=int(np.sum(degenerate)),
                     tolerance=tolerance,
                     surface=h.label,
                     weights=(w.a, w.b))


def check_degenerate(h: SurfaceH, w: WeightPair, point: tuple[float, float],
                     tol: float = 0.0) -> bool:
    """The degenerate-case conditions at a point.

    With nonzero gradient this is the multiplied-out inequality

        a^2 H_xx H_y^2 + (1-a^2-b^2) H_xy H_x H_y + b^2 H_yy H_x^2 >= 0,

    and with ∇H = 0 (below 1e-10 times the surface's median gradient norm)
    positive semidefiniteness of
    [[a^2 H_xx, (1-a^2-b^2) H_xy / 2], [(1-a^2-b^2) H_xy / 2, b^2 H_yy]].
    """
    x, y = point
    hx, hy = (float(g) for g in h.grad(x, y))
    hxx, hxy, hyy = (float(v) for v in h.hess(x, y))
    floor = GRAD_ZERO_THRESHOLD * _derivative_scale(h)
    if math.hypot(hx, hy) > floor:
        expr = (w.a ** 2 * hxx * hy * hy
                + w.cross * hxy * hx * hy
                + w.b ** 2 * hyy * hx * hx)
        scale = max(1.0, abs(hxx * hy * hy), abs(hyy * hx * hx), abs(hxy * hx * hy))
        return expr >= -max(tol, 1e-12 * scale)
    m = np.array([[w.a ** 2 * hxx, w.cross * hxy / 2.0],
                  [w.cross * hxy / 2.0, w.b ** 2 * hyy]])
    eigs = np.linalg.eigvalsh(m)
    scale = max(1.0, float(np.max(np.abs(m))))
    return bool(eigs[0] >= -max(tol, 1e-12 * scale))


def elliptic_params(w: WeightPair) -> tuple[float, float]:
    """The (p, q) of the elliptic smoothing measure.

        p = 4 / ((1-(a-b)^2)((a+b)^2-1)),
        q = 2 (a^2 - b^2 - 1) / ((1-(a-b)^2)((a+b)^2-1)),

    which satisfy 1/p + q^2/p^2 = b^2 and 1 + 1/p + 2q/p + q^2/p^2 = a^2.
    Only defined in the elliptic regime.
    """
    if w.regime() != ELLIPTIC:
        raise RegimeError(f"elliptic parameters need an elliptic weight pair, got {w.regime()}")
    a, b = w.a, w.b
    denom = (1.0 - (a - b) ** 2) * ((a + b) ** 2 - 1.0)
    return 4.0 / denom, 2.0 * (a * a - b * b - 1.0) / denom


def _block_matrices(h: SurfaceH, w: WeightPair, R: float, smoothing,
                    point: tuple[float, float]) -> tuple[np.ndarray, np.ndarray]:
    """(E, T) with E the weight/covariance factor and T the derivative factor.

    The sufficiency certificate is positive semidefiniteness of the Hadamard
    product E * T, where for a(R) the smoothing exponent, N = R - 1 and
    1/M = a(R)/(R (a(R) - 1)):

        T = [[H_xx H + N H_x^2, H_xy H + N H_x H_y, H_x],
             [H_xy H + N H_x H_y, H_yy H + N H_y^2, H_y],
             [H_x, H_y, 1/M]]

    Parabolic weights take eps = R^-beta with off-diagonal sign 1 -+ eps/(ab)
    (minus for a+b=1, plus for |a-b|=1 after the +-1 diagonal conjugation);
    elliptic weights use the exact covariance row products.
    """
    if R <= 1.0:
        raise ParameterError(f"R must exceed 1, got {R}")
    regime = w.regime()
    a, b = w.a, w.b
    if regime == PARABOLIC:
        try:
            alpha, beta = smoothing
        except TypeError:
            raise ParameterError("parabolic regime needs smoothing exponents (alpha, beta)")
        if not (0.0 < beta < alpha < 1.0 and alpha + beta > 1.0):
            raise ParameterError(f"need 1 > alpha > beta > 0 with alpha+beta > 1, got {(alpha, beta)}")
        aR = R - R ** alpha
        eps = R ** (-beta)
        sign = -1.0 if abs(a + b - 1.0) <= 1e-12 else 1.0
        E = np.array([[1.0 + eps / a ** 2, 1.0 + sign * eps / (a * b), 1.0],
                      [1.0 + sign * eps / (a * b), 1.0 + eps / b ** 2, 1.0],
                      [1.0, 1.0, 1.0]])
    elif regime == ELLIPTIC:
        c = float(smoothing) if not isinstance(smoothing, tuple) else None
        if c is None or c <= 0:
            raise ParameterError("elliptic regime needs a positive smoothing constant c")
        if R <= c + 1.0:
            raise ParameterError(f"need R > c + 1 so a(R) = R - c > 1; got R={R}, c={c}")
        aR = R - c
        E = np.array([
            [1.0, w.cross / (2 * a * b), (1 + a * a - b * b) / (2 * a)],
            [w.cross / (2 * a * b), 1.0, (1 - a * a + b * b) / (2 * b)],
            [(1 + a * a - b * b) / (2 * a), (1 - a * a + b * b) / (2 * b), 1.0]])
    else:
        raise RegimeError("block condition is undefined for infeasible weights")

    x, y = point
    H = float(h.eval(x, y))
    hx, hy = (float(g) for g in h.grad(x, y))
    hxx, hxy, hyy = (float(v) for v in h.hess(x, y))
    N = R - 1.0
    inv_M = aR / (R * (aR - 1.0))
    T = np.array([[hxx * H + N * hx * hx, hxy * H + N * hx * hy, hx],
                  [hxy * H + N * hx * hy, hyy * H + N * hy * hy, hy],
                  [hx, hy, inv_M]])
    return E, T


def block_condition(h: SurfaceH, w: WeightPair, R: float, smoothing,
                    point: tuple[float, float], tol: float = 1e-9,
                    return_minors: bool = False):
    """Sufficiency block certificate at one point.

    Builds the 3x3 Hadamard product of the covariance factor and the
    derivative factor T and reports whether all leading principal minors are
    >= -tol.  Minors, not eigenvalues, so a failure names the first minor that
    went negative, matching the structure of the certificate.
    """
    x, y = point
    H = float(h.eval(x, y))
    hx, hy = (float(g) for g in h.grad(x, y))
    if H <= 0:
        raise ParameterError(f"block condition needs H > 0 at {point}, got {H}")
    if abs(hx) < 1e-12 or abs(hy) < 1e-12:
        raise ParameterError(f"block condition needs nonvanishing partials at {point}")
    E, T = _block_matrices(h, w, R, smoothing, point)
    m = E * T
    minors = (float(m[0, 0]),
              float(np.linalg.det(m[:2, :2])),
              float(np.linalg.det(m)))
    ok = all(v >= -tol for v in minors)
    if return_minors:
        return ok, minors
    return ok


def classify_homogeneous(h: SurfaceH, samples: int = 400, tol: float = 1e-8) -> dict:
    """Classify a 1-homogeneous surface through its profile h(t) = H(1, t).

    Returns a dict with "kind" one of convex / pl_classic / pl_a_minus_b /
    pl_b_minus_a / mixed, plus the recovered exponents for the power families.
    Convexity is decided by the sign of h'' on a log-spaced grid; concave
    profiles are least-squares fitted to C t^b (log|h| linear in log t) and the
    fit residual below 1e-6 picks the family.  "mixed" marks a concave profile
    fitting no power form, which for a smooth exactly-1-homogeneous surface is
    a numerical-surface artifact.
    """
    from .errors import DomainError

    x0, x1, y0, y1 = h.domain
    try:
        for lam in (0.5, 2.0):
            xs = np.linspace(max(x0 * 1.02, x0 + 1e-6), min(x1 / lam, x1) * 0.98, 12)
            ys = np.linspace(max(y0 * 1.02, y0 + 1e-6), min(y1 / lam, y1) * 0.98, 13)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            if np.any(np.abs(h.eval(lam * X, lam * Y) - lam * h.eval(X, Y)) > 1e-8):
                raise PreconditionError(f"surface {h.label} is not 1-homogeneous at scale {lam}")
    except DomainError as exc:
        raise PreconditionError(
            f"surface {h.label} cannot support the homogeneity probe: {exc}") from exc

    # profile h(t) = H(x_ref, x_ref t)/x_ref with an in-domain reference scale
    x_ref = min(max(1.0, x0 * 1.02), x1 * 0.98)
    t_lo = max(y0 / x_ref, 1e-3)
    t_hi = min(y1 / x_ref, 1e3)
    t = np.geomspace(max(t_lo, 0.2), min(t_hi, 5.0), samples)
    prof = h.eval(np.full_like(t, x_ref), x_ref * t) / x_ref
    # three-point second differences on the uneven log-spaced grid
    t0, t1v, t2v = t[:-2], t[1:-1], t[2:]
    f0, f1v, f2v = prof[:-2], prof[1:-1], prof[2:]
    d2 = 2.0 * (f0 / ((t1v - t0) * (t2v - t0))
                - f1v / ((t2v - t1v) * (t1v - t0))
                + f2v / ((t2v - t1v) * (t2v - t0)))
    if np.min(d2) >= -tol * max(1.0, float(np.max(np.abs(prof)))):
        return {"kind": "convex"}

    sign = float(np.sign(prof[len(prof) // 2]))
    if np.any(np.sign(prof) != sign) or sign == 0.0:
        return {"kind": "mixed"}
    logt = np.log(t)
    logh = np.log(np.abs(prof))
    bexp, logC = np.polyfit(logt, logh, 1)
    resid = float(np.max(np.abs(logh - (bexp * logt + logC))))
    if resid > 1e-6:
        return {"kind": "mixed", "residual": resid}
    if sign > 0 and 0.0 < bexp < 1.0:
        return {"kind": "pl_classic", "a": 1.0 - bexp, "b": float(bexp)}
    if sign < 0 and bexp < 0.0:
        return {"kind": "pl_a_minus_b", "a": 1.0 - bexp, "b": float(-bexp)}
    if sign < 0 and bexp > 1.0:
        return {"kind": "pl_b_minus_a", "a": float(bexp - 1.0), "b": float(bexp)}
    return {"kind": "mixed", "residual": resid, "exponent": float(bexp)}


def concave_ma_check(h: SurfaceH, w: WeightPair, resolution: tuple[int, int] = (40, 40),
                     tol: float = 1e-7) -> tuple[bool, Optional[dict]]:
    """Whether a concave surface matches the equality structure of the PDI.

    Checks on every grid node, with scale-normalized tolerances:

        H_xx H_yy - H_xy^2 = 0            (homogeneous Monge-Ampere)
        a^2 H_xx/H_x^2 = b^2 H_yy/H_y^2
        (1-a^2-b^2) H_xy / (H_x H_y) >= 0
        |1-a^2-b^2| = 2ab  (within 1e-10)

    The sign condition divides by H_x H_y to absorb the reflection that the
    classification's WLOG H_x, H_y > 0 performs.  Non-concave input raises
    PreconditionError with a witness node; returns (verdict, witness) where
    witness names the first failing condition and node.
    """
    X, Y = h.interior_meshgrid(*resolution, inset_frac=0.01)
    hx, hy = h.grad(X, Y)
    hxx, hxy, hyy = h.hess(X, Y)
    hscale = float(np.max(np.abs(np.stack([hxx, hxy, hyy]))))
    hscale = max(hscale, 1e-30)

    # concavity: 2x2 Hessian NSD within 1e-8*scale at every node
    trace_pos = np.maximum(hxx, hyy)
    det = hxx * hyy - hxy * hxy
    nsd = (trace_pos <= 1e-8 * hscale) & (det >= -1e-8 * hscale * hscale)
    if not np.all(nsd):
        i, j = np.unravel_index(int(np.argmin(nsd)), nsd.shape)
        raise PreconditionError(
            f"surface not concave at ({X[i, j]:.4g}, {Y[i, j]:.4g})", (float(X[i, j]), float(Y[i, j])))

    if abs(abs(w.cross) - 2.0 * w.a * w.b) > 1e-10:
        return False, {"condition": "|1-a^2-b^2| = 2ab", "value": abs(w.cross) - 2 * w.a * w.b}

    ma = np.abs(det)
    ma_scale = np.maximum(np.abs(hxx * hyy) + hxy * hxy, 1e-30)
    bad = ma > tol * ma_scale
    if np.any(bad):
        i, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
        return False, {"condition": "Monge-Ampere", "node": (float(X[i, j]), float(Y[i, j]))}

    lhs = w.a ** 2 * hxx / hx ** 2
    rhs = w.b ** 2 * hyy / hy ** 2
    ratio_scale = np.maximum(np.abs(lhs) + np.abs(rhs), 1e-30)
    bad = np.abs(lhs - rhs) > tol * ratio_scale
    if np.any(bad):
        i, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
        return False, {"condition": "a^2 Hxx/Hx^2 = b^2 Hyy/Hy^2",
                       "node": (float(X[i, j]), float(Y[i, j]))}

    oriented = w.cross * hxy / (hx * hy)
    bad = oriented < -tol * np.maximum(np.abs(oriented), 1.0)
    if np.any(bad):
        i, j = np.unravel_index(int(np.argmax(bad)), bad.shape)
        return False, {"condition": "sign((1-a^2-b^2) Hxy/(HxHy)) >= 0",
                       "node": (float(X[i, j]), float(Y[i, j]))}
    return True, None
