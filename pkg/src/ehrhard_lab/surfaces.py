"""Closed-form surfaces H(x, y) with analytic first and second partials.

Each constructor returns a SurfaceH whose evaluators are vectorized over numpy
arrays.  The catalog covers:

* the Gaussian-composition surface Phi(a Phi^-1(x) + b Phi^-1(y)),
* the 1-homogeneous power families x^a y^{1-a}, -x^a y^{-(a-1)}, -x^{-a} y^{a+1},
* Young surfaces x^{1/p} y^{1/q} and their validity test p a^2 + q b^2 <= 1,
* Minkowski surfaces (x^{1/p} + y^{1/q})^r with the r >= 1 - (a sqrt(1-p) + b sqrt(1-q))^2 test,
* power means M_p(x, y) = (a x^p + b y^p)^{1/p},
* plain power laws x^alpha y^beta and the one-variable quartic -x^4.

Validity predicates take the weight pair of the target inequality; the
Minkowski test uses the sqrt(1-p) form with p, q <= 1 (the sqrt(p-1) variant
has a negative radicand on its own domain).

Sign conventions for the third power family: make_pl_family("b_minus_a", a)
takes a < 0 and returns -x^{-a} y^{a+1} (so a = -2 gives -x^2 y^{-1}); the
classifier instead reports pl_b_minus_a for fits -x^{-a} y^{a+1} with a > 0,
whose natural weights are (a, a+1).  Both conventions appear in the surface
labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ParameterError
from .gaussian import std_normal_cdf, std_normal_pdf, std_normal_quantile

Rect = tuple[float, float, float, float]  # x0, x1, y0, y1

DEFAULT_POSITIVE_RECT: Rect = (0.05, 10.0, 0.05, 10.0)


@dataclass(frozen=True)
class SurfaceH:
    """A twice-differentiable surface on a closed rectangle.

    eval/grad/hess are vectorized: they accept scalars or equal-shape arrays
    and return arrays of the same shape (grad a 2-tuple, hess a 3-tuple of
    H_xx, H_xy, H_yy).  grad and hess are None for nonsmooth combinations
    (pointwise maxima), which only the sup-convolution engine may consume.
    """

    domain: Rect
    eval: Callable
    grad: Optional[Callable]
    hess: Optional[Callable]
    label: str

    def contains(self, x, y, pad: float = 0.0) -> bool:
        x0, x1, y0, y1 = self.domain
        return bool(np.all(x >= x0 - pad) and np.all(x <= x1 + pad)
                    and np.all(y >= y0 - pad) and np.all(y <= y1 + pad))

    def interior_meshgrid(self, nx: int, ny: int, inset_frac: float = 0.0):
        x0, x1, y0, y1 = self.domain
        dx = (x1 - x0) * inset_frac
        dy = (y1 - y0) * inset_frac
        xs = np.linspace(x0 + dx, x1 - dx, nx)
        ys = np.linspace(y0 + dy, y1 - dy, ny)
        return np.meshgrid(xs, ys, indexing="ij")


def _as_arrays(x, y):
    return np.asarray(x, dtype=float), np.asarray(y, dtype=float)


def make_ehrhard(a: float, b: float, inset: float = 0.02) -> SurfaceH:
    """Phi(a Phi^-1(x) + b Phi^-1(y)) on [inset, 1-inset]^2.

    Partials come from the chain rule through Phi and Phi^-1; with
    xi = Phi^-1(x), eta = Phi^-1(y), z = a xi + b eta:

        H_x  = a phi(z)/phi(xi)                H_y  = b phi(z)/phi(eta)
        H_xx = a phi(z)(xi - a z)/phi(xi)^2    H_yy = b phi(z)(eta - b z)/phi(eta)^2
        H_xy = -a b z phi(z) / (phi(xi) phi(eta))

    The corner limits H(0,1) = H(1,0) = 0 are metadata of the extremal
    problem, not evaluable points of this surface.
    """
    if not (0.0 < inset < 0.5):
        raise ParameterError(f"inset must lie in (0, 1/2), got {inset}")

    def _xi_eta(x, y):
        x, y = _as_arrays(x, y)
        return std_normal_quantile(x), std_normal_quantile(y)

    def h_eval(x, y):
        xi, eta = _xi_eta(x, y)
        return std_normal_cdf(a * xi + b * eta)

    def h_grad(x, y):
        xi, eta = _xi_eta(x, y)
        z = a * xi + b * eta
        pz = std_normal_pdf(z)
        return a * pz / std_normal_pdf(xi), b * pz / std_normal_pdf(eta)

    def h_hess(x, y):
        xi, eta = _xi_eta(x, y)
        z = a * xi + b * eta
        pz = std_normal_pdf(z)
        pxi = std_normal_pdf(xi)
        peta = std_normal_pdf(eta)
        hxx = a * pz * (xi - a * z) / (pxi * pxi)
        hyy = b * pz * (eta - b * z) / (peta * peta)
        hxy = -a * b * z * pz / (pxi * peta)
        return hxx, hxy, hyy

    return SurfaceH(domain=(inset, 1.0 - inset, inset, 1.0 - inset),
                    eval=h_eval, grad=h_grad, hess=h_hess,
                    label=f"ehrhard:a={a:g},b={b:g}")


def make_power(alpha: float, beta: float, sign: float = 1.0,
               domain: Rect = DEFAULT_POSITIVE_RECT, label: str = "") -> SurfaceH:
    """sign * x^alpha y^beta on a positive rectangle, closed-form partials."""
    if sign not in (1.0, -1.0):
        raise ParameterError(f"sign must be +-1, got {sign}")

    def h_eval(x, y):
        x, y = _as_arrays(x, y)
        return sign * x ** alpha * y ** beta

    def h_grad(x, y):
        x, y = _as_arrays(x, y)
        core = sign * x ** alpha * y ** beta
        return alpha * core / x, beta * core / y

    def h_hess(x, y):
        x, y = _as_arrays(x, y)
        core = sign * x ** alpha * y ** beta
        hxx = alpha * (alpha - 1.0) * core / (x * x)
        hyy = beta * (beta - 1.0) * core / (y * y)
        hxy = alpha * beta * core / (x * y)
        return hxx, hxy, hyy

    return SurfaceH(domain=domain, eval=h_eval, grad=h_grad, hess=h_hess,
                    label=label or f"power:alpha={alpha:g},beta={beta:g},sign={sign:g}")


def make_pl_family(exponent_a: float, case: str = "classic",
                   domain: Rect = DEFAULT_POSITIVE_RECT) -> SurfaceH:
    """The three 1-homogeneous power families.

    classic:    a in (0,1),      H =  x^a y^{1-a}     (weights (a, 1-a))
    a_minus_b:  a in (1,inf),    H = -x^a y^{-(a-1)}  (weights (a, a-1))
    b_minus_a:  a in (-inf,0),   H = -x^{-a} y^{a+1}  (literal (p-3) convention;
                the matching weight pair is (-a, -a-1))
    """
    a = float(exponent_a)
    if case == "classic":
        if not (0.0 < a < 1.0):
            raise ParameterError(f"classic case needs a in (0,1), got {a}")
        return make_power(a, 1.0 - a, 1.0, domain, label=f"pl:a={a:g}")
    if case == "a_minus_b":
        if not a > 1.0:
            raise ParameterError(f"a_minus_b case needs a in (1,inf), got {a}")
        return make_power(a, -(a - 1.0), -1.0, domain, label=f"pl_a_minus_b:a={a:g}")
    if case == "b_minus_a":
        if not a < 0.0:
            raise ParameterError(f"b_minus_a case needs a in (-inf,0), got {a}")
        return make_power(-a, a + 1.0, -1.0, domain, label=f"pl_b_minus_a:a={a:g}")
    raise ParameterError(f"unknown pl case {case!r}")


def make_young(p: float, q: float, domain: Rect = DEFAULT_POSITIVE_RECT) -> SurfaceH:
    """x^{1/p} y^{1/q} on a positive rectangle.

    p = 0 or q = 0 is rejected; the validity test handles those limits through
    the perturbed exponents p - eps instead.
    """
    if p == 0.0 or q == 0.0:
        raise ParameterError("p and q must be nonzero (the p=0 limit lives in young_valid)")
    return make_power(1.0 / p, 1.0 / q, 1.0, domain, label=f"young:p={p:g},q={q:g}")


def young_valid(p: float, q: float, a: float, b: float) -> bool:
    """Whether x^{1/p} y^{1/q} passes for weights (a, b): p a^2 + q b^2 <= 1.

    Evaluates the closed form directly; p = 0 or q = 0 plug in as written,
    agreeing with the p_eps = p - eps limiting argument.
    """
    return p * a * a + q * b * b <= 1.0 + 1e-12


def make_minkowski(p: float, q: float, r: float,
                   domain: Rect = DEFAULT_POSITIVE_RECT) -> SurfaceH:
    """(x^{1/p} + y^{1/q})^r on a positive rectangle, p, q, r > 0."""
    if p <= 0 or q <= 0 or r <= 0:
        raise ParameterError(f"p, q, r must be positive, got {(p, q, r)}")
    ip, iq = 1.0 / p, 1.0 / q

    def base(x, y):
        return x ** ip + y ** iq

    def h_eval(x, y):
        x, y = _as_arrays(x, y)
        return base(x, y) ** r

    def h_grad(x, y):
        x, y = _as_arrays(x, y)
        s = base(x, y)
        common = r * s ** (r - 1.0)
        return common * ip * x ** (ip - 1.0), common * iq * y ** (iq - 1.0)

    def h_hess(x, y):
        x, y = _as_arrays(x, y)
        s = base(x, y)
        sx = ip * x ** (ip - 1.0)
        sy = iq * y ** (iq - 1.0)
        sxx = ip * (ip - 1.0) * x ** (ip - 2.0)
        syy = iq * (iq - 1.0) * y ** (iq - 2.0)
        f1 = r * s ** (r - 1.0)
        f2 = r * (r - 1.0) * s ** (r - 2.0)
        hxx = f2 * sx * sx + f1 * sxx
        hyy = f2 * sy * sy + f1 * syy
        hxy = f2 * sx * sy
        return hxx, hxy, hyy

    return SurfaceH(domain=domain, eval=h_eval, grad=h_grad, hess=h_hess,
                    label=f"minkowski:p={p:g},q={q:g},r={r:g}")


def minkowski_valid(p: float, q: float, r: float, a: float, b: float) -> bool:
    """Whether (x^{1/p}+y^{1/q})^r passes for weights (a, b).

    True iff 0 < p, q <= 1 and r >= 1 - (a sqrt(1-p) + b sqrt(1-q))^2.
    """
    if not (0.0 < p <= 1.0 and 0.0 < q <= 1.0):
        return False
    s = a * np.sqrt(1.0 - p) + b * np.sqrt(1.0 - q)
    return r >= 1.0 - s * s - 1e-12


def make_mp_mean(p: float, a: float, b: float,
                 domain: Rect = DEFAULT_POSITIVE_RECT) -> SurfaceH:
    """Power mean M_p(x, y) = (a x^p + b y^p)^{1/p}, p >= 1, a + b = 1.

    Convex and 1-homogeneous on the positive quadrant; p < 1 is rejected
    because the convexity claim would fail.
    """
    if p < 1.0:
        raise ParameterError(f"power mean needs p >= 1, got {p}")
    if abs(a + b - 1.0) > 1e-12:
        raise ParameterError(f"power mean needs a + b = 1, got {a}+{b}")

    def s_of(x, y):
        return a * x ** p + b * y ** p

    def h_eval(x, y):
        x, y = _as_arrays(x, y)
        return s_of(x, y) ** (1.0 / p)

    def h_grad(x, y):
        x, y = _as_arrays(x, y)
        s = s_of(x, y)
        common = s ** (1.0 / p - 1.0)
        return common * a * x ** (p - 1.0), common * b * y ** (p - 1.0)

    def h_hess(x, y):
        x, y = _as_arrays(x, y)
        s = s_of(x, y)
        sx = a * p * x ** (p - 1.0)
        sy = b * p * y ** (p - 1.0)
        sxx = a * p * (p - 1.0) * x ** (p - 2.0)
        syy = b * p * (p - 1.0) * y ** (p - 2.0)
        ip = 1.0 / p
        f1 = ip * s ** (ip - 1.0)
        f2 = ip * (ip - 1.0) * s ** (ip - 2.0)
        hxx = f2 * sx * sx + f1 * sxx
        hyy = f2 * sy * sy + f1 * syy
        hxy = f2 * sx * sy
        return hxx, hxy, hyy

    return SurfaceH(domain=domain, eval=h_eval, grad=h_grad, hess=h_hess,
                    label=f"mp:p={p:g},a={a:g}")


def make_neg_quartic(domain: Rect = (-1.0, 1.0, -1.0, 1.0)) -> SurfaceH:
    """H(x, y) = -x^4, constant in y: the degenerate-case test surface.

    Both partials vanish along x = 0 and H_y vanishes identically, so the PDI
    ratio form is undefined everywhere; only the degenerate-case matrix
    conditions and the direct inequality apply.
    """

    def h_eval(x, y):
        x, y = _as_arrays(x, y)
        return -(x ** 4) + 0.0 * y

    def h_grad(x, y):
        x, y = _as_arrays(x, y)
        return -4.0 * x ** 3, 0.0 * y

    def h_hess(x, y):
        x, y = _as_arrays(x, y)
        return -12.0 * x ** 2, 0.0 * y, 0.0 * y

    return SurfaceH(domain=domain, eval=h_eval, grad=h_grad, hess=h_hess,
                    label="neg_quartic")


def make_sqrt_norm(domain: Rect = DEFAULT_POSITIVE_RECT) -> SurfaceH:
    """sqrt(x^2 + y^2): the convex 1-homogeneous reference surface."""

    def h_eval(x, y):
        x, y = _as_arrays(x, y)
        return np.hypot(x, y)

    def h_grad(x, y):
        x, y = _as_arrays(x, y)
        r = np.hypot(x, y)
        return x / r, y / r

    def h_hess(x, y):
        x, y = _as_arrays(x, y)
        r3 = np.hypot(x, y) ** 3
        return y * y / r3, -x * y / r3, x * x / r3

    return SurfaceH(domain=domain, eval=h_eval, grad=h_grad, hess=h_hess,
                    label="sqrt_norm")


def surface_max(h1: SurfaceH, h2: SurfaceH) -> SurfaceH:
    """Pointwise max of two surfaces on the intersection of their domains.

    Nonsmooth: grad/hess are None, so only evaluation-level machinery (the
    sup-convolution engine) accepts the result.
    """
    d1, d2 = h1.domain, h2.domain
    dom = (max(d1[0], d2[0]), min(d1[1], d2[1]), max(d1[2], d2[2]), min(d1[3], d2[3]))
    if dom[0] >= dom[1] or dom[2] >= dom[3]:
        raise ParameterError("surface domains do not overlap")

    def h_eval(x, y):
        return np.maximum(h1.eval(x, y), h2.eval(x, y))

    return SurfaceH(domain=dom, eval=h_eval, grad=None, hess=None,
                    label=f"max({h1.label},{h2.label})")


def affine_transform(h: SurfaceH, c: float, d: float) -> SurfaceH:
    """c*H + d with c > 0; used by the PDI affine-invariance checks."""
    if c <= 0:
        raise ParameterError(f"affine factor must be positive, got {c}")

    def h_eval(x, y):
        return c * h.eval(x, y) + d

    def h_grad(x, y):
        gx, gy = h.grad(x, y)
        return c * gx, c * gy

    def h_hess(x, y):
        hxx, hxy, hyy = h.hess(x, y)
        return c * hxx, c * hxy, c * hyy

    return SurfaceH(domain=h.domain, eval=h_eval, grad=h_grad, hess=h_hess,
                    label=f"affine({c:g},{d:g},{h.label})")


def from_catalog(surface_id: str) -> SurfaceH:
    """Resolve a catalog id like "ehrhard:a=0.5,b=0.5" to a surface.

    Families: ehrhard, pl, pl_a_minus_b, pl_b_minus_a, young, minkowski, mp,
    power, sqrt_norm, neg_quartic.
    """
    name, _, argstr = surface_id.partition(":")
    kwargs = {}
    if argstr:
        for item in argstr.split(","):
            key, _, val = item.partition("=")
            if not val:
                raise ParameterError(f"malformed catalog argument {item!r} in {surface_id!r}")
            try:
                kwargs[key.strip()] = float(val)
            except ValueError as exc:
                raise ParameterError(f"non-numeric value in {item!r}") from exc
    try:
        if name == "ehrhard":
            return make_ehrhard(kwargs.pop("a"), kwargs.pop("b"),
                                inset=kwargs.pop("inset", 0.02))
        if name == "pl":
            return make_pl_family(kwargs.pop("a"), "classic")
        if name == "pl_a_minus_b":
            return make_pl_family(kwargs.pop("a"), "a_minus_b")
        if name == "pl_b_minus_a":
            return make_pl_family(kwargs.pop("a"), "b_minus_a")
        if name == "young":
            return make_young(kwargs.pop("p"), kwargs.pop("q"))
        if name == "minkowski":
            return make_minkowski(kwargs.pop("p"), kwargs.pop("q"), kwargs.pop("r"))
        if name == "mp":
            a = kwargs.pop("a")
            return make_mp_mean(kwargs.pop("p"), a, 1.0 - a)
        if name == "power":
            alpha = kwargs.pop("alpha")
            beta = kwargs.pop("beta", alpha)
            return make_power(alpha, beta, sign=kwargs.pop("sign", 1.0))
        if name == "sqrt_norm":
            return make_sqrt_norm()
        if name == "neg_quartic":
            return make_neg_quartic()
    except KeyError as exc:
        raise ParameterError(f"catalog id {surface_id!r} missing argument {exc}") from exc
    raise ParameterError(f"unknown catalog family {name!r}")


def catalog_ids() -> list[str]:
    """Representative ids for every catalog family (CLI `catalog` listing)."""
    return [
        "ehrhard:a=0.5,b=0.5",
        "ehrhard:a=0.3,b=0.7",
        "pl:a=0.5",
        "pl_a_minus_b:a=2",
        "pl_b_minus_a:a=-2",
        "young:p=2,q=2",
        "minkowski:p=1,q=1,r=1",
        "mp:p=2,a=0.5",
        "power:alpha=0.3,beta=0.3",
        "sqrt_norm",
        "neg_quartic",
    ]
