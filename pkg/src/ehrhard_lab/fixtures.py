"""Reusable test-function families for verification runs.

Everything returns GridFunction instances on the default [-8, 8] window,
constant outside their active region so edge clamping is exact.  Seeded
generators draw from numpy's default_rng for reproducibility.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .supconv import GridFunction, GridFunction2D, grid_function_from_callable

DEFAULT_GRID = (-8.0, 8.0, 4001)


def constant(value: float, grid=DEFAULT_GRID) -> GridFunction:
    lo, hi, n = grid
    return GridFunction(lo, hi, np.full(int(n), float(value)), (value, value))


def gaussian_bump(height: float = 1.0, center: float = 0.0, width: float = 1.0,
                  floor: float = 0.0, grid=DEFAULT_GRID) -> GridFunction:
    """floor + height exp(-((x-center)/width)^2); log-concave when floor = 0."""
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    vals = floor + height * np.exp(-((xs - center) / width) ** 2)
    return GridFunction(lo, hi, vals, (float(np.min(vals)), float(np.max(vals))))


def logistic_halfline(threshold: float, width: float, lo_val: float = 0.01,
                      hi_val: float = 0.99, grid=DEFAULT_GRID) -> GridFunction:
    """Smoothed indicator of (-inf, threshold], mapped into [lo_val, hi_val]."""
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    vals = lo_val + (hi_val - lo_val) * expit((threshold - xs) / width)
    return GridFunction(lo, hi, vals, (lo_val, hi_val))


def random_log_concave(rng: np.random.Generator, low: float, high: float,
                       grid=DEFAULT_GRID) -> GridFunction:
    """A scaled Gaussian bump with random center/width/height.

    Values live in (tiny, high]; the tiny tail floor keeps the range inside a
    positive domain side when `low` is positive.
    """
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    center = rng.uniform(-2.0, 2.0)
    width = rng.uniform(0.6, 2.5)
    height = rng.uniform(0.3 * high, 0.9 * high)
    vals = height * np.exp(-((xs - center) / width) ** 2)
    vals = np.maximum(vals, max(low, 1e-60))
    return GridFunction(lo, hi, vals, (float(np.min(vals)), float(np.max(vals))))


def random_smooth_in(rng: np.random.Generator, low: float, high: float,
                     n_bumps: int = 3, grid=DEFAULT_GRID) -> GridFunction:
    """Smooth random mixture of bumps affinely squeezed into [low, high]."""
    lo, hi, n = grid
    xs = np.linspace(lo, hi, int(n))
    z = np.zeros_like(xs)
    for _ in range(n_bumps):
        z += rng.uniform(-1, 1) * np.exp(-((xs - rng.uniform(-3, 3)) / rng.uniform(0.5, 2.0)) ** 2)
    zmin, zmax = float(np.min(z)), float(np.max(z))
    if zmax - zmin < 1e-12:
        return constant(0.5 * (low + high), grid)
    mid, half = 0.5 * (low + high), 0.45 * (high - low)
    vals = mid + half * (2 * (z - zmin) / (zmax - zmin) - 1.0)
    return GridFunction(lo, hi, vals, (float(np.min(vals)), float(np.max(vals))))


def random_log_concave_2d(rng: np.random.Generator, low: float, high: float,
                          span: float = 5.0, n: int = 41) -> GridFunction2D:
    """2-D Gaussian bump with a random center and axis widths."""
    xs = np.linspace(-span, span, n)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    cx, cy = rng.uniform(-1.0, 1.0, size=2)
    wx, wy = rng.uniform(0.8, 2.5, size=2)
    height = rng.uniform(0.3 * high, 0.9 * high)
    vals = height * np.exp(-(((X - cx) / wx) ** 2 + ((Y - cy) / wy) ** 2))
    vals = np.maximum(vals, max(low, 1e-60))
    return GridFunction2D(-span, span, -span, span, vals,
                          (float(np.min(vals)), float(np.max(vals))))


def constant_2d(value: float, span: float = 5.0, n: int = 21) -> GridFunction2D:
    return GridFunction2D(-span, span, -span, span, np.full((n, n), float(value)),
                          (value, value))
