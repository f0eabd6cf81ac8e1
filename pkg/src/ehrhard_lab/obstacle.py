"""The corner obstacle problem: maximal PDI-feasible surface on [0, 1]^2.

The extremal problem pins the four corners, H(0,0), H(0,1), H(1,0) <= 0 and
H(1,1) <= 1, and asks for the largest surface whose discretized PDI stays
nonnegative.  For the Gaussian the answer is the distribution-composition
surface, so every feasible iterate must sit below it: the solver checks that
dominance every sweep and aborts if it ever fails (that would be a numerical
defect, not a discovery).

The discretization uses central differences with the grid spacing as step;
nodes whose discrete gradient falls under 1e-8 switch to the degenerate
matrix condition.  The ascent is projected: per sweep, every node of one
checkerboard color rises by the largest step that keeps the discretized PDI
above -tol across its 9-point neighborhood (a vectorized linear bound per
stencil constraint, refined by global verify-and-halve), so feasibility is
invariant by construction and values are monotone.  The solver is a heuristic:
its guarantees are the invariants it maintains, not a convergence proof.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .errors import ParameterError, PreconditionError
from .pdi import WeightPair, check_pdi_grid
from .supconv import GapResult, GridFunction, gap_scale, inequality_gap
from .surfaces import SurfaceH, make_ehrhard


@dataclass(frozen=True)
class GridSurface:
    """Values on a uniform n x n grid over [0,1]^2 with the corner obstacle."""

    values: np.ndarray
    boundary_inset: float = 0.01

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 2 or vals.shape[0] != vals.shape[1] or vals.shape[0] < 3:
            raise ParameterError(f"grid surface needs a square grid >= 3, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("grid surface has non-finite values")
        for (i, j, cap) in ((0, 0, 0.0), (0, -1, 0.0), (-1, 0, 0.0), (-1, -1, 1.0)):
            if vals[i, j] > cap + 1e-12:
                raise ParameterError(
                    f"corner obstacle violated: value {vals[i, j]} at corner index {(i, j)} caps at {cap}")

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    def value_at(self, u: float, v: float) -> float:
        i = int(round(u * (self.n - 1)))
        j = int(round(v * (self.n - 1)))
        return float(self.values[i, j])

    def to_csv(self, path) -> None:
        nodes = self.nodes
        U, V = np.meshgrid(nodes, nodes, indexing="ij")
        arr = np.column_stack([U.ravel(), V.ravel(), self.values.ravel()])
        np.savetxt(path, arr, delimiter=",", header="u,v,value", comments="")

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "boundary_inset": self.boundary_inset,
                           "values": self.values.tolist()}, sort_keys=True)


@dataclass
class ObstacleProblem:
    """Weights, corner caps, grid resolution and iteration limits."""

    weights: WeightPair
    n: int = 101
    corner_caps: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 1.0)  # (0,0),(0,1),(1,0),(1,1)
    low_edge_cap: float = 0.0
    high_edge_cap: float = 1.0
    pdi_tol: float = 1e-9
    deg_tol: float = 1e-6
    grad_tol: float = 1e-8
    step_cap: float = 0.1
    safety: float = 0.9
    max_sweeps: int = 4000
    min_increase: float = 1e-7
    boundary_inset: float = 0.01

    def __post_init__(self):
        if not self.weights.feasible():
            raise ParameterError(f"infeasible weights {(self.weights.a, self.weights.b)}")
        if self.n < 3:
            raise ParameterError(f"grid must have n >= 3, got {self.n}")


def product_init(prob: ObstacleProblem) -> GridSurface:
    """The product surface u v: the solver's default start for a + b = 1.

    Strictly feasible with margin everywhere (its PDI is (1-a^2-b^2)/(uv) > 0,
    its discrete central differences are exact, and no interior node is
    degenerate), with corners and low edges exactly on the obstacle.  The
    softplus hinge, by contrast, is machine-flat over most of the square and
    the degenerate matrix condition freezes flat plateaus: no monotone
    feasible path can lift them at a useful rate.
    """
    if prob.weights.cross <= 0:
        raise ParameterError("product init needs 1 - a^2 - b^2 > 0 (a + b = 1 regime)")
    u = np.linspace(0.0, 1.0, prob.n)
    U, V = np.meshgrid(u, u, indexing="ij")
    return GridSurface(values=U * V, boundary_inset=prob.boundary_inset)


def feasible_init(prob: ObstacleProblem, smoothing_width: float = 0.02) -> GridSurface:
    """Softplus-smoothed hinge s log(1 + e^{(u+v-1)/s}) - s log 2.

    Convex, hence PDI-feasible; the -s log 2 shift puts the off-diagonal
    corners exactly on the obstacle (the PDI only sees derivatives, so the
    shift costs nothing).  In the flat zone the degenerate matrix condition
    holds marginally (lambda_min = 0 in the continuum for any smoothing of
    u+v-1), which is why the solver's degenerate branch carries its own
    discretization tolerance.
    """
    if smoothing_width <= 0:
        raise ParameterError(f"smoothing width must be positive, got {smoothing_width}")
    s = smoothing_width
    u = np.linspace(0.0, 1.0, prob.n)
    U, V = np.meshgrid(u, u, indexing="ij")
    z = (U + V - 1.0) / s
    vals = s * np.logaddexp(0.0, z) - s * math.log(2.0)
    return GridSurface(values=vals, boundary_inset=prob.boundary_inset)


def _interior_derivs(Z: np.ndarray, h: float) -> dict:
    c = Z[1:-1, 1:-1]
    xp, xm = Z[2:, 1:-1], Z[:-2, 1:-1]
    yp, ym = Z[1:-1, 2:], Z[1:-1, :-2]
    return {
        "Hx": (xp - xm) / (2 * h),
        "Hy": (yp - ym) / (2 * h),
        "Hxx": (xp - 2 * c + xm) / (h * h),
        "Hyy": (yp - 2 * c + ym) / (h * h),
        "Hxy": (Z[2:, 2:] - Z[2:, :-2] - Z[:-2, 2:] + Z[:-2, :-2]) / (4 * h * h),
    }


def _feasibility_margin(Z: np.ndarray, h: float, w: WeightPair,
                        grad_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """(nondegenerate PDI margin, degenerate matrix margin), one valid per node.

    The returned arrays carry +inf where the other branch applies, so
    feasibility is margin >= -tol on both arrays at once.
    """
    d = _interior_derivs(Z, h)
    a2, b2, cr = w.a ** 2, w.b ** 2, w.cross
    degenerate = (np.abs(d["Hx"]) < grad_tol) | (np.abs(d["Hy"]) < grad_tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        pdi = (a2 * d["Hxx"] / d["Hx"] ** 2 + cr * d["Hxy"] / (d["Hx"] * d["Hy"])
               + b2 * d["Hyy"] / d["Hy"] ** 2)
    pdi = np.where(degenerate, np.inf, pdi)
    m11 = a2 * d["Hxx"]
    m22 = b2 * d["Hyy"]
    off = 0.5 * cr * d["Hxy"]
    lam_min = 0.5 * (m11 + m22) - np.sqrt(0.25 * (m11 - m22) ** 2 + off ** 2)
    deg_margin = np.where(degenerate, lam_min, np.inf)
    return pdi, deg_margin


def _is_feasible(Z: np.ndarray, h: float, prob: ObstacleProblem) -> bool:
    pdi, deg = _feasibility_margin(Z, h, prob.weights, prob.grad_tol)
    return bool(np.all(pdi >= -prob.pdi_tol) and np.all(deg >= -prob.deg_tol))


def _pad_to_full(interior: np.ndarray, n: int, fill: float) -> np.ndarray:
    out = np.full((n, n), fill)
    out[1:-1, 1:-1] = interior
    return out


def _step_bounds(Z: np.ndarray, h: float, prob: ObstacleProblem) -> np.ndarray:
    """Per-node upper bound on a raise that keeps every stencil constraint.

    Linearized response of each of the nine affected constraints; exact for
    the own-node and diagonal responses, first-order for the side neighbors
    (the global verify-and-halve pass catches what linearization misses).
    """
    n = Z.shape[0]
    w = prob.weights
    a2, b2, cr = w.a ** 2, w.b ** 2, w.cross
    tol = prob.pdi_tol
    d = _interior_derivs(Z, h)
    pdi, deg = _feasibility_margin(Z, h, w, prob.grad_tol)
    degenerate = np.isinf(pdi)
    h2 = h * h

    with np.errstate(divide="ignore", invalid="ignore"):
        slack = pdi + tol
        deg_slack_xx = a2 * d["Hxx"] + prob.deg_tol
        deg_slack_yy = b2 * d["Hyy"] + prob.deg_tol

        bounds_interior = {}

        # Checkerboard share accounting: during one color's sweep a constraint
        # is spent simultaneously by its own node plus the two hurting
        # diagonal sources (same color: 3 spenders), or by its four side
        # sources (other color: 4 spenders).  Splitting the slack accordingly
        # makes the joint linearized step feasible without rollback storms.
        own_share, diag_share, side_share = 3.0, 3.0, 4.0

        # own node: pdi decreases at exact linear rate 2/h^2 (a^2/Hx^2 + b^2/Hy^2)
        own_rate = (2.0 / h2) * (a2 / d["Hx"] ** 2 + b2 / d["Hy"] ** 2)
        own_bound = np.where(degenerate,
                             np.minimum(deg_slack_xx / (2 * a2 / h2), deg_slack_yy / (2 * b2 / h2)),
                             slack / own_share / own_rate)
        bounds_interior[(0, 0)] = own_bound

        # side neighbors: Hxx/Hyy gain d/h^2, Hx/Hy shift by -+d/2h
        for (oi, oj) in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            if oi != 0:
                sigma = -float(oi)  # raising the source shifts the neighbor's Hx by sigma*d/2h
                rate = (a2 * (d["Hx"] / h2 - sigma * d["Hxx"] / h) / d["Hx"] ** 3
                        - cr * d["Hxy"] * sigma / (2 * h * d["Hx"] ** 2 * d["Hy"]))
            else:
                sigma = -float(oj)
                rate = (b2 * (d["Hy"] / h2 - sigma * d["Hyy"] / h) / d["Hy"] ** 3
                        - cr * d["Hxy"] * sigma / (2 * h * d["Hy"] ** 2 * d["Hx"]))
            nondeg_bound = np.where(rate < 0.0, slack / side_share / (-rate), np.inf)
            # degenerate neighbor: its diagonal entry only grows, so no linear bound
            bounds_interior[(oi, oj)] = np.where(degenerate, np.inf, nondeg_bound)

        # diagonal neighbors: only Hxy moves, by tau*d/(4h^2), tau = oi*oj
        for (oi, oj) in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            tau = float(oi * oj)
            rate = cr * tau / (4 * h2 * d["Hx"] * d["Hy"])
            nondeg_bound = np.where(rate < 0.0, slack / diag_share / (-rate), np.inf)
            # degenerate: off-diagonal growth shrinks lam_min at most at rate |cr|/(8h^2)
            deg_bound = np.where(deg + prob.deg_tol > 0,
                                 (deg + prob.deg_tol) / diag_share / (abs(cr) / (8 * h2) + 1e-300), 0.0)
            bounds_interior[(oi, oj)] = np.where(degenerate, deg_bound, nondeg_bound)

    # gather: bound at source node = min over offsets of constraint at node+offset
    out = np.full((n, n), prob.step_cap)
    for (oi, oj), binterior in bounds_interior.items():
        bfull = _pad_to_full(binterior, n, np.inf)
        # constraint at (i+oi, j+oj) seen from source (i, j): shift by -offset
        shifted = np.full((n, n), np.inf)
        src_i = slice(max(0, -oi), n - max(0, oi))
        src_j = slice(max(0, -oj), n - max(0, oj))
        dst_i = slice(max(0, oi), n - max(0, -oi))
        dst_j = slice(max(0, oj), n - max(0, -oj))
        shifted[src_i, src_j] = bfull[dst_i, dst_j]
        out = np.minimum(out, shifted)

    out = np.clip(np.nan_to_num(out, nan=0.0, posinf=prob.step_cap, neginf=0.0),
                  0.0, prob.step_cap)
    # the extremal problem pins its own boundary values: 0 where a zero-mean
    # marginal forces M(0,.)=0, 1 on the far edges; corners keep their caps
    cap_grid = np.full_like(Z, np.inf)
    cap_grid[0, :] = prob.low_edge_cap
    cap_grid[:, 0] = prob.low_edge_cap
    cap_grid[-1, :] = prob.high_edge_cap
    cap_grid[:, -1] = prob.high_edge_cap
    caps = prob.corner_caps
    for (i, j, cap) in ((0, 0, caps[0]), (0, -1, caps[1]), (-1, 0, caps[2]), (-1, -1, caps[3])):
        cap_grid[i, j] = min(cap_grid[i, j], cap)
    out = np.minimum(out, np.maximum(cap_grid - Z, 0.0))
    return out


@dataclass
class DominanceReport:
    passed: bool
    worst_margin: float
    witness: tuple[float, float]


def reference_samples(w: WeightPair, nodes: np.ndarray, inset: float):
    """(index array, reference values) of the extremal surface on the region."""
    ref = make_ehrhard(w.a, w.b, inset=min(inset, 0.01))
    keep = (nodes >= inset - 1e-12) & (nodes <= 1.0 - inset + 1e-12)
    idx = np.flatnonzero(keep)
    U, V = np.meshgrid(nodes[idx], nodes[idx], indexing="ij")
    return idx, ref.eval(U, V)


def dominance_check(candidate: GridSurface, w: WeightPair,
                    tol: float = 1e-6, inset: float = None) -> DominanceReport:
    """candidate <= reference composition surface + tol on the effective region.

    The reference is the Gaussian extremal surface for these weights; the
    effective region keeps nodes inside [inset, 1-inset]^2 (default the
    candidate's boundary inset), where the reference's derivatives are
    resolvable at the candidate's grid spacing.
    """
    if inset is None:
        inset = candidate.boundary_inset
    nodes = candidate.nodes
    idx, refvals = reference_samples(w, nodes, inset)
    diff = candidate.values[np.ix_(idx, idx)] - refvals
    k = int(np.argmax(diff))
    i, j = np.unravel_index(k, diff.shape)
    worst = float(diff[i, j])
    return DominanceReport(passed=worst <= tol,
                           worst_margin=worst,
                           witness=(float(nodes[idx][i]), float(nodes[idx][j])))


@dataclass
class SolveLog:
    """Convergence history plus the abort diagnostics, JSON-lines ready."""

    sweeps: list = field(default_factory=list)
    converged: bool = False
    aborted: Optional[str] = None

    def to_json_lines(self) -> str:
        lines = [json.dumps(rec, sort_keys=True) for rec in self.sweeps]
        lines.append(json.dumps({"converged": self.converged, "aborted": self.aborted},
                                sort_keys=True))
        return "\n".join(lines)


def solve(prob: ObstacleProblem, init: Optional[GridSurface] = None,
          check_dominance: bool = True) -> tuple[GridSurface, SolveLog]:
    """Projected ascent from a feasible start.

    Red-black sweeps; per sweep each color's nodes rise together by their
    verified safe steps.  Terminates when the largest single-sweep increase
    falls under min_increase or the sweep limit is reached.  Iterates are
    monotone by construction; the dominance invariant is checked every sweep
    and a violation aborts with diagnostics (partial result returned).
    """
    if init is None:
        init = product_init(prob) if prob.weights.cross > 0 else feasible_init(prob)
    if init.n != prob.n:
        raise ParameterError(f"init resolution {init.n} != problem resolution {prob.n}")
    Z = init.values.copy()
    Z0 = Z.copy()
    h = 1.0 / (prob.n - 1)
    if not _is_feasible(Z, h, prob):
        raise PreconditionError("initial surface violates the discretized PDI")

    n = prob.n
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    colors = ((I + J) % 2 == 0, (I + J) % 2 == 1)
    log = SolveLog()
    ref_cache = None
    Zprev = Z.copy()

    cap_grid = np.full_like(Z, np.inf)
    cap_grid[0, :] = prob.low_edge_cap
    cap_grid[:, 0] = prob.low_edge_cap
    cap_grid[-1, :] = prob.high_edge_cap
    cap_grid[:, -1] = prob.high_edge_cap
    caps = prob.corner_caps
    for (ci, cj, cap) in ((0, 0, caps[0]), (0, -1, caps[1]), (-1, 0, caps[2]), (-1, -1, caps[3])):
        cap_grid[ci, cj] = min(cap_grid[ci, cj], cap)

    lift_state = {"lam": 1.0}

    def profile_lift(Z: np.ndarray) -> tuple[np.ndarray, float]:
        """Line-search along the accumulated-rise profile (PDI is invariant
        under translations, so the rise shape is a natural long-range ascent
        direction that red-black local steps only propagate diffusively).
        The accepted step fraction warm-starts the next search."""
        P = np.minimum(Z - Z0, np.maximum(cap_grid - Z, 0.0))
        pmax = float(np.max(P))
        if pmax <= 0.0:
            return Z, 0.0
        lam = 1.0
        for _ in range(24):
            Znew = Z + lam * P
            if _is_feasible(Znew, h, prob):
                lift_state["lam"] = lam
                return Znew, lam * pmax
            lam *= 0.5
        return Z, 0.0

    for sweep in range(prob.max_sweeps):
        max_raise = 0.0
        for color in colors:
            D = _step_bounds(Z, h, prob) * prob.safety
            D[~color] = 0.0
            # selective rollback: halve only steps adjacent to violated constraints
            for _ in range(60):
                if not np.any(D > 0):
                    break
                Znew = Z + D
                pdi, deg = _feasibility_margin(Znew, h, prob.weights, prob.grad_tol)
                viol = (pdi < -prob.pdi_tol) | (deg < -prob.deg_tol)
                if not np.any(viol):
                    Z = Znew
                    max_raise = max(max_raise, float(np.max(D)))
                    break
                guilty = np.zeros_like(D, dtype=bool)
                vfull = _pad_to_full(viol.astype(float), n, 0.0) > 0.5
                for oi in (-1, 0, 1):
                    for oj in (-1, 0, 1):
                        src_i = slice(max(0, -oi), n - max(0, oi))
                        src_j = slice(max(0, -oj), n - max(0, oj))
                        dst_i = slice(max(0, oi), n - max(0, -oi))
                        dst_j = slice(max(0, oj), n - max(0, -oj))
                        guilty[src_i, src_j] |= vfull[dst_i, dst_j]
                D[guilty] *= 0.5
                D[D < 1e-18] = 0.0
        Z, lift = profile_lift(Z)
        max_raise = max(max_raise, lift)
        rec = {"sweep": sweep, "max_raise": max_raise,
               "center": float(Z[n // 2, n // 2])}
        if check_dominance:
            if ref_cache is None:
                ref_cache = reference_samples(prob.weights, np.linspace(0.0, 1.0, n),
                                              prob.boundary_inset)
            idx, refvals = ref_cache
            diff = Z[np.ix_(idx, idx)] - refvals
            k = int(np.argmax(diff))
            worst = float(diff.flat[k])
            rec["dominance_margin"] = worst
            if worst > 1e-6:
                i, j = np.unravel_index(k, diff.shape)
                log.sweeps.append(rec)
                log.aborted = (f"dominance violated at node ({idx[i]}, {idx[j]}): margin {worst}")
                return GridSurface(values=Zprev, boundary_inset=prob.boundary_inset), log
        Zprev = Z.copy()
        log.sweeps.append(rec)
        if max_raise < prob.min_increase:
            log.converged = True
            break
    return GridSurface(values=Z, boundary_inset=prob.boundary_inset), log


def lower_bound_certificate(h: SurfaceH, f: GridFunction, g: GridFunction,
                            w: WeightPair, measure=None,
                            tol_scale: float = 1e-6) -> tuple[bool, GapResult]:
    """Certify H(∫f, ∫g) lower-bounds the sup-convolution functional.

    Requires a PDI-feasible surface (PreconditionError otherwise), then
    verifies the direct inequality on this test pair within -tol_scale*scale.
    """
    report = check_pdi_grid(h, w, resolution=(120, 120))
    if not report.feasible:
        raise PreconditionError(
            f"surface {h.label} is not PDI feasible (min {report.min_value} at {report.argmin})")
    res = inequality_gap(h, f, g, w, measure)
    return res.gap >= -tol_scale * gap_scale(h, f, g), res
