"""Direct numerical evaluation of the sup-convolution inequality.

The left side integrates the grid envelope

    h(t) = sup over a x' + b y' = t of H(f(x'), g(y'))
         = max over x in f's grid of H(f(x), g((t - a x)/b)),

(the (x-y)/a, y/b parametrization of the inequality is this form after the
substitution x' = (x-y)/a, y' = y/b) against the measure; the right side is
H(∫f dmu, ∫g dmu).  Essential supremum is approximated by grid supremum with
linear interpolation, which coincides with the supremum on the continuous
fixtures used throughout; for discontinuous f, g the two can differ and no
attempt is made to resolve that here.  Out-of-grid evaluations clamp to edge
values (test functions are built constant outside a window).

The L^p smoothing route evaluates, entirely in log space,

    ∫ ( ∫ H^R(f((x-y)/a), g(y/b)) dgamma_{p,q,x}(y) )^{1/(R - R^alpha)} dgamma_1(x)

with the inner Gaussian recentred at mean -q x / p, variance 1/p.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, ParameterError, PositivityError, RegimeError
from .gaussian import MeasureSpec, gaussian_quadrature_nodes, standard_gaussian
from .pdi import PARABOLIC, WeightPair
from .surfaces import SurfaceH


@dataclass(frozen=True)
class GridFunction:
    """A test function sampled on a uniform 1-D grid, with a declared range.

    Between nodes the function is linear; outside [lo, hi] it is the edge
    value.  All sampled values must lie inside the declared closed range.
    """

    lo: float
    hi: float
    values: np.ndarray
    range: tuple[float, float]
    extrapolated: int = field(default=0, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or vals.size < 2:
            raise ParameterError(f"grid needs n >= 2 values, got shape {vals.shape}")
        if not self.hi > self.lo:
            raise ParameterError(f"grid needs hi > lo, got [{self.lo}, {self.hi}]")
        r0, r1 = self.range
        if np.min(vals) < r0 or np.max(vals) > r1:
            raise ParameterError(
                f"values [{np.min(vals)}, {np.max(vals)}] leave declared range [{r0}, {r1}]")

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)

    def __call__(self, t):
        """Linear interpolation, clamped to edge values outside the grid."""
        return np.interp(np.asarray(t, dtype=float), self.nodes, self.values)

    def refine(self) -> "GridFunction":
        """Same function on a doubled grid (midpoints get interpolated values)."""
        nodes = np.linspace(self.lo, self.hi, 2 * self.n - 1)
        return GridFunction(self.lo, self.hi, self(nodes), self.range)

    def to_json(self) -> str:
        return json.dumps({"lo": self.lo, "hi": self.hi, "n": self.n,
                           "range": list(self.range), "values": self.values.tolist()},
                          sort_keys=True)

    def to_csv(self, path) -> None:
        arr = np.column_stack([self.nodes, self.values])
        np.savetxt(path, arr, delimiter=",", header="node,value", comments="")


def grid_function_from_callable(fn: Callable, lo: float = -8.0, hi: float = 8.0,
                                n: int = 4001,
                                declared_range: Optional[tuple[float, float]] = None) -> GridFunction:
    vals = np.asarray(fn(np.linspace(lo, hi, n)), dtype=float)
    if declared_range is None:
        declared_range = (float(np.min(vals)), float(np.max(vals)))
    return GridFunction(lo, hi, vals, declared_range)


def grid_function_from_csv(path) -> GridFunction:
    arr = np.loadtxt(path, delimiter=",", skiprows=1)
    nodes, vals = arr[:, 0], arr[:, 1]
    steps = np.diff(nodes)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise ParameterError(f"grid in {path} is not uniform")
    return GridFunction(float(nodes[0]), float(nodes[-1]), vals,
                        (float(np.min(vals)), float(np.max(vals))))


@dataclass
class GapResult:
    """lhs, rhs and their difference, with quadrature diagnostics."""

    lhs: float
    rhs: float
    gap: float
    quadrature_error: float
    grid_resolution: dict

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _check_ranges(h: SurfaceH, f: GridFunction, g: GridFunction) -> None:
    x0, x1, y0, y1 = h.domain
    if f.range[0] < x0 - 1e-12 or f.range[1] > x1 + 1e-12:
        raise DomainError(f"f range {f.range} leaves H's x-side [{x0}, {x1}]")
    if g.range[0] < y0 - 1e-12 or g.range[1] > y1 + 1e-12:
        raise DomainError(f"g range {g.range} leaves H's y-side [{y0}, {y1}]")


def envelope_at(h: SurfaceH, f: GridFunction, g: GridFunction, w: WeightPair,
                t: np.ndarray) -> tuple[np.ndarray, int]:
    """The grid envelope at arbitrary points t; also counts fully-extrapolated rows.

    Ties in the maximum resolve to the smallest x (argmax takes the first hit
    on the ascending grid).
    """
    _check_ranges(h, f, g)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = f.nodes
    fv = f.values
    Y = (t[:, None] - w.a * x[None, :]) / w.b
    gv = g(Y.ravel()).reshape(Y.shape)
    vals = h.eval(np.broadcast_to(fv, Y.shape), gv)
    outside = (Y < g.lo) | (Y > g.hi)
    extrapolated = int(np.sum(np.all(outside, axis=1)))
    return np.max(vals, axis=1), extrapolated


def sup_convolve(h: SurfaceH, f: GridFunction, g: GridFunction, w: WeightPair,
                 t_grid: tuple[float, float, int] = (-8.0, 8.0, 2001)) -> GridFunction:
    """Grid sup-convolution on a uniform t-grid.

    Monotone in the inputs (pointwise larger f under an H increasing in x can
    only raise the envelope) and monotone under grid refinement (the maximum
    runs over a superset of candidates).
    """
    lo, hi, n = t_grid
    vals, extrapolated = envelope_at(h, f, g, w, np.linspace(lo, hi, int(n)))
    return GridFunction(lo, hi, vals, (float(np.min(vals)), float(np.max(vals))),
                        extrapolated=extrapolated)


def integrate_grid_function(f: GridFunction, measure: MeasureSpec, nodes: int = 160) -> float:
    x, wts = gaussian_quadrature_nodes(measure, nodes)
    return float(np.sum(wts * f(x)))


def gap_scale(h: SurfaceH, f: GridFunction, g: GridFunction) -> float:
    """Unit-free scale for gap thresholds: median |H| over the test-function image."""
    vals = h.eval(f.values, g(f.nodes))
    med = float(np.median(np.abs(vals)))
    return med if med > 0 else 1.0


def inequality_gap(h: SurfaceH, f: GridFunction, g: GridFunction, w: WeightPair,
                   measure: Optional[MeasureSpec] = None, nodes: int = 160) -> GapResult:
    """lhs - rhs of the sup-convolution inequality under a 1-D measure.

    lhs integrates the envelope at the quadrature nodes; rhs evaluates H at
    the mean point (∫f, ∫g), which must land inside H's domain.  The
    quadrature error estimate comes from doubling the node count (the envelope
    is re-evaluated exactly at the finer nodes, so refinement never lowers it).
    """
    if measure is None:
        measure = standard_gaussian(1)
    if measure.dimension != 1:
        raise ParameterError("inequality_gap integrates one-dimensional measures")

    def lhs_at(n):
        x, wts = gaussian_quadrature_nodes(measure, n)
        vals, extrapolated = envelope_at(h, f, g, w, x)
        return float(np.sum(wts * vals)), extrapolated

    lhs_coarse, _ = lhs_at(nodes)
    lhs, extrapolated = lhs_at(2 * nodes)

    fmean = integrate_grid_function(f, measure, 2 * nodes)
    gmean = integrate_grid_function(g, measure, 2 * nodes)
    x0, x1, y0, y1 = h.domain
    if not (x0 - 1e-12 <= fmean <= x1 + 1e-12 and y0 - 1e-12 <= gmean <= y1 + 1e-12):
        raise DomainError(f"mean point ({fmean}, {gmean}) outside H's domain {h.domain}")
    rhs = float(h.eval(fmean, gmean))
    return GapResult(lhs=lhs, rhs=rhs, gap=lhs - rhs,
                     quadrature_error=abs(lhs - lhs_coarse),
                     grid_resolution={"f_n": f.n, "g_n": g.n, "quad_nodes": 2 * nodes,
                                      "extrapolated": extrapolated})


def _logsumexp(logs: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(logs, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(logs - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if axis is not None else float(out.reshape(()))


def _log_trapezoid(logs: np.ndarray, dy: float) -> float:
    """log of the trapezoid integral of exp(logs) on a uniform grid."""
    wts = np.full(logs.shape, dy)
    wts[0] *= 0.5
    wts[-1] *= 0.5
    return float(_logsumexp(logs + np.log(wts)))


def lp_smoothed_lhs(h: SurfaceH, f: GridFunction, g: GridFunction, w: WeightPair,
                    R: float, alpha: float, beta: float,
                    measure: Optional[MeasureSpec] = None,
                    outer_nodes: int = 120, inner_nodes: int = 1501) -> float:
    """The L^p-smoothed left side at finite R (parabolic weights).

    Uses p = R^beta and q = -b p (q = +b p in the a = b + 1 case), the inner
    Gaussian recentred at mean -q x/p with variance 1/p, and the outer
    exponent 1/(R - R^alpha).  Requires 1 > alpha > beta > 0 with
    alpha + beta > 1 and H > 0 on the image of (f, g).

    The inner integrand H^R d(inner Gaussian) concentrates far more sharply
    than the inner Gaussian itself (width ~ R^-1/2, not p^-1/2), so each inner
    integral is evaluated in log space on a dense scan of the relevant window
    followed by a zoom pass around the log-integrand's peak.
    """
    if measure is None:
        measure = standard_gaussian(1)
    if measure.kind != "standard_gaussian" or measure.dimension != 1:
        raise ParameterError("the smoothing lemma is set on the 1-D standard Gaussian")
    if not (0.0 < beta < alpha < 1.0 and alpha + beta > 1.0):
        raise ParameterError(f"need 1 > alpha > beta > 0 and alpha+beta > 1, got {(alpha, beta)}")
    if w.regime() != PARABOLIC:
        raise RegimeError(f"L^p smoothing schedule is the parabolic one; weights are {w.regime()}")
    _check_ranges(h, f, g)

    a, b = w.a, w.b
    p = R ** beta
    q = b * p if abs(a - (b + 1.0)) <= 1e-12 else -b * p
    aR = R - R ** alpha
    log_dens_const = 0.5 * math.log(p / (2.0 * math.pi))

    def log_inner(x: float) -> float:
        m = -q * x / p
        # window: inner-Gaussian mass plus everything f and g can see
        half = 12.0 / math.sqrt(p)
        lo = min(m - half, x - a * max(abs(f.lo), abs(f.hi)), -b * max(abs(g.lo), abs(g.hi)))
        hi = max(m + half, x + a * max(abs(f.lo), abs(f.hi)), b * max(abs(g.lo), abs(g.hi)))

        def logs_on(ys: np.ndarray) -> np.ndarray:
            vals = h.eval(f((x - ys) / a), g(ys / b))
            if np.any(vals <= 0.0):
                k = int(np.argmax(vals <= 0.0))
                raise PositivityError(f"H must stay positive; H={vals[k]} at y={ys[k]}")
            return R * np.log(vals) + log_dens_const - 0.5 * p * (ys - m) ** 2

        ys = np.linspace(lo, hi, inner_nodes)
        logs = logs_on(ys)
        k = int(np.argmax(logs))
        peak = logs[k]
        # zoom on the region carrying the mass (log within 60 of the peak)
        live = np.flatnonzero(logs > peak - 60.0)
        zlo = ys[max(live[0] - 1, 0)]
        zhi = ys[min(live[-1] + 1, len(ys) - 1)]
        zys = np.linspace(zlo, zhi, 2 * inner_nodes + 1)
        return _log_trapezoid(logs_on(zys), zys[1] - zys[0])

    xs, wx = gaussian_quadrature_nodes(measure, outer_nodes)
    phi = np.array([math.exp(log_inner(float(x)) / aR) for x in xs])
    return float(np.sum(wx * phi))


@dataclass(frozen=True)
class GridFunction2D:
    """A test function on a uniform 2-D grid with a declared range.

    Bilinear between nodes, edge-clamped outside.
    """

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    values: np.ndarray
    range: tuple[float, float]

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or min(vals.shape) < 2:
            raise ParameterError(f"2-D grid needs at least 2x2 values, got {vals.shape}")
        r0, r1 = self.range
        if np.min(vals) < r0 or np.max(vals) > r1:
            raise ParameterError("2-D grid values leave the declared range")

    @property
    def x_nodes(self) -> np.ndarray:
        return np.linspace(self.x_lo, self.x_hi, self.values.shape[0])

    @property
    def y_nodes(self) -> np.ndarray:
        return np.linspace(self.y_lo, self.y_hi, self.values.shape[1])

    def interp_axis0(self, pts: np.ndarray) -> np.ndarray:
        """Linear interpolation along the first axis at shared query points."""
        out = np.empty((len(pts), self.values.shape[1]))
        nodes = self.x_nodes
        for j in range(self.values.shape[1]):
            out[:, j] = np.interp(pts, nodes, self.values[:, j])
        return out

    def __call__(self, x, y):
        """Bilinear interpolation with edge clamping (vectorized)."""
        xn, yn = self.x_nodes, self.y_nodes
        x = np.clip(np.asarray(x, dtype=float), xn[0], xn[-1])
        y = np.clip(np.asarray(y, dtype=float), yn[0], yn[-1])
        dx = xn[1] - xn[0]
        dy = yn[1] - yn[0]
        i = np.clip(((x - xn[0]) / dx).astype(int), 0, len(xn) - 2)
        j = np.clip(((y - yn[0]) / dy).astype(int), 0, len(yn) - 2)
        tx = (x - xn[i]) / dx
        ty = (y - yn[j]) / dy
        v = self.values
        return ((1 - tx) * (1 - ty) * v[i, j] + tx * (1 - ty) * v[i + 1, j]
                + (1 - tx) * ty * v[i, j + 1] + tx * ty * v[i + 1, j + 1])


def integrate_grid_function_2d(f: GridFunction2D, measure: MeasureSpec, nodes: int = 48) -> float:
    pts, wts = gaussian_quadrature_nodes(measure, nodes)
    return float(np.sum(wts * f(pts[:, 0], pts[:, 1])))


def tensorize_gap(h: SurfaceH, f2d: GridFunction2D, g2d: GridFunction2D, w: WeightPair,
                  measure: Optional[MeasureSpec] = None, quad_nodes: int = 48) -> GapResult:
    """Iterated 1-D reduction of the 2-D inequality.

    Mirrors the dimension-iteration proof: solve the 1-D envelope along the
    first axis for every pair of second coordinates, integrate it out, then
    run the 1-D envelope along the second axis of the integrated table.  The
    result lower-bounds the full 2-D envelope integral and still dominates the
    right side whenever the 1-D inequality holds, so a feasible surface keeps
    the reported gap nonnegative up to quadrature error.
    """
    if measure is None:
        measure = standard_gaussian(2)
    if measure.kind != "standard_gaussian" or measure.dimension != 2:
        raise ParameterError("tensorize_gap is set on the 2-D standard Gaussian")
    x0, x1, y0, y1 = h.domain
    for gf, (lo, hi) in ((f2d, (x0, x1)), (g2d, (y0, y1))):
        if gf.range[0] < lo - 1e-12 or gf.range[1] > hi + 1e-12:
            raise DomainError(f"2-D grid range {gf.range} leaves H's side [{lo}, {hi}]")

    a, b = w.a, w.b
    fx = f2d.values                       # (nfx, nfy) over (x1, x2)
    x1_nodes = f2d.x_nodes
    x2_nodes = f2d.y_nodes
    y2_nodes = g2d.y_nodes

    def lhs_at(n_quad: int) -> float:
        t_nodes, t_wts = gaussian_quadrature_nodes(standard_gaussian(1), n_quad)
        # first-axis sweep: P[x2, y2] = ∫ max_{x1} H(f(x1,x2), g((t - a x1)/b, y2)) dγ(t)
        P = np.zeros((fx.shape[1], g2d.values.shape[1]))
        for t, wt in zip(t_nodes, t_wts):
            yq = (t - a * x1_nodes) / b
            G = g2d.interp_axis0(yq)      # (nfx, ngy)
            vals = h.eval(fx[:, :, None], G[:, None, :])
            P += wt * np.max(vals, axis=0)
        # second-axis sweep on the integrated table
        env = np.empty(len(t_nodes))
        dy = y2_nodes[1] - y2_nodes[0]
        rows = np.arange(len(x2_nodes))
        for k, t in enumerate(t_nodes):
            yq = np.clip((t - a * x2_nodes) / b, y2_nodes[0], y2_nodes[-1])
            j = np.clip(((yq - y2_nodes[0]) / dy).astype(int), 0, len(y2_nodes) - 2)
            ty = (yq - y2_nodes[j]) / dy
            env[k] = np.max((1 - ty) * P[rows, j] + ty * P[rows, j + 1])
        return float(np.sum(t_wts * env))

    lhs_coarse = lhs_at(quad_nodes // 2)
    lhs = lhs_at(quad_nodes)

    fmean = integrate_grid_function_2d(f2d, measure, quad_nodes)
    gmean = integrate_grid_function_2d(g2d, measure, quad_nodes)
    if not (x0 - 1e-12 <= fmean <= x1 + 1e-12 and y0 - 1e-12 <= gmean <= y1 + 1e-12):
        raise DomainError(f"mean point ({fmean}, {gmean}) outside H's domain {h.domain}")
    rhs = float(h.eval(fmean, gmean))
    return GapResult(lhs=lhs, rhs=rhs, gap=lhs - rhs,
                     quadrature_error=abs(lhs - lhs_coarse),
                     grid_resolution={"f_shape": list(fx.shape),
                                      "g_shape": list(g2d.values.shape),
                                      "quad_nodes": quad_nodes})
