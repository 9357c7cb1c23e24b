"""Empirical measures, grid densities, kernel convolutions, and
Wasserstein-1 distances.

Exact W1 between equal-size uniform point clouds reduces to a minimum-cost
assignment and is solved exactly (cubic-time solver) up to n = 2048; beyond
that, callers should switch to the sliced surrogate and label results as
approximate. The path-space variant weighs paths with the exponentially
discounted sup norm sup_t e^{-alpha t} |phi(t)|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist
from scipy.stats import wasserstein_distance

from .config import DangerKernelSpec, KernelSpec, eval_danger, eval_kernel
from .rng import uniform01

W1_EXACT_MAX = 2048


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Uniform-weight point cloud in the plane."""

    points: np.ndarray  # (n, 2)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 1:
            raise ValueError("points must have shape (n, 2) with n >= 1")
        if not np.all(np.isfinite(p)):
            raise ValueError("points must be finite")
        object.__setattr__(self, "points", p)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class GridDensity:
    """Nonnegative cell-averaged density on a rectangular grid, total mass 1.

    ``values[ix, iy]`` is the density on cell (ix, iy); the x axis is the
    first index. ``domain`` is (x0, x1, y0, y1).
    """

    domain: tuple[float, float, float, float]
    nx: int
    ny: int
    values: np.ndarray  # (nx, ny)

    MASS_TOL = 1e-12

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.nx, self.ny):
            raise ValueError(f"values shape {v.shape} != ({self.nx}, {self.ny})")
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "values", v)
        x0, x1, y0, y1 = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ValueError("domain must have positive extent")

    @property
    def dx(self) -> float:
        x0, x1, _, _ = self.domain
        return (x1 - x0) / self.nx

    @property
    def dy(self) -> float:
        _, _, y0, y1 = self.domain
        return (y1 - y0) / self.ny

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def mass(self) -> float:
        return float(np.sum(self.values)) * self.cell_area

    def check_mass(self):
        m = self.mass()
        if abs(m - 1.0) > self.MASS_TOL:
            raise ValueError(f"grid density mass {m!r} deviates from 1")
        return self

    def cell_centers(self):
        x0, _, y0, _ = self.domain
        xs = x0 + (np.arange(self.nx) + 0.5) * self.dx
        ys = y0 + (np.arange(self.ny) + 0.5) * self.dy
        return xs, ys

    def center_points(self) -> np.ndarray:
        """All cell centers as an (nx*ny, 2) array (x-major order)."""
        xs, ys = self.cell_centers()
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        return np.column_stack((gx.ravel(), gy.ravel()))

    def normalized(self) -> "GridDensity":
        m = self.mass()
        if m <= 0:
            raise ValueError("cannot normalize a zero grid density")
        return GridDensity(self.domain, self.nx, self.ny, self.values / m)

    def moments(self):
        """(mean, per-coordinate variance) of the cell-center distribution."""
        xs, ys = self.cell_centers()
        w = self.values * self.cell_area
        total = np.sum(w)
        mx = float(np.sum(w.sum(axis=1) * xs)) / total
        my = float(np.sum(w.sum(axis=0) * ys)) / total
        vx = float(np.sum(w.sum(axis=1) * (xs - mx) ** 2)) / total
        vy = float(np.sum(w.sum(axis=0) * (ys - my) ** 2)) / total
        return np.array([mx, my]), np.array([vx, vy])


# ---------------------------------------------------------------------------
# Wasserstein-1 distances


def w1_exact(mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
    """Exact W1 between equal-size uniform clouds via optimal assignment."""
    if mu.n != nu.n:
        raise ValueError(f"size mismatch: {mu.n} vs {nu.n}; resample first")
    if mu.n > W1_EXACT_MAX:
        raise ValueError(f"n={mu.n} exceeds exact-solver limit {W1_EXACT_MAX}; "
                         "use w1_sliced")
    cost = cdist(mu.points, nu.points)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


def w1_sliced(mu: EmpiricalMeasure, nu: EmpiricalMeasure,
              n_projections: int, gen: np.random.Generator) -> float:
    """Average 1-d W1 over random projection directions.

    A scalable surrogate: it never exceeds the true planar W1 (projection is
    a contraction). Results are labeled approximate wherever reported.
    """
    if n_projections < 1:
        raise ValueError("n_projections must be >= 1")
    theta = 2.0 * np.pi * uniform01(gen, n_projections)
    dirs = np.column_stack((np.cos(theta), np.sin(theta)))
    a = mu.points @ dirs.T  # (n_mu, P)
    b = nu.points @ dirs.T
    if mu.n == nu.n:
        total = np.mean(np.abs(np.sort(a, axis=0) - np.sort(b, axis=0)),
                        axis=0).sum()
        return float(total) / n_projections
    vals = [wasserstein_distance(a[:, j], b[:, j]) for j in range(n_projections)]
    return float(np.mean(vals))


def w1_alpha_paths(a_paths: np.ndarray, b_paths: np.ndarray,
                   times: np.ndarray, alpha: float) -> float:
    """Exact assignment W1 between path ensembles under the discounted
    sup metric d(phi, psi) = sup_t e^{-alpha t} |phi(t) - psi(t)|.

    ``a_paths`` and ``b_paths`` have shape (K, n_times, 2) on the same grid.
    """
    a = np.asarray(a_paths, dtype=np.float64)
    b = np.asarray(b_paths, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 3 or a.shape[2] != 2:
        raise ValueError("path ensembles must share shape (K, n_times, 2)")
    if a.shape[1] != t.shape[0]:
        raise ValueError("time grid length does not match the ensembles")
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    k = a.shape[0]
    if k > W1_EXACT_MAX:
        raise ValueError(f"ensemble size {k} exceeds exact-solver limit")
    weights = np.exp(-alpha * t)
    cost = np.zeros((k, k))
    for j, w in enumerate(weights):
        d = cdist(a[:, j, :], b[:, j, :]) * w
        np.maximum(cost, d, out=cost)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].mean())


# ---------------------------------------------------------------------------
# Kernel-measure convolutions


def convolve(kernel: KernelSpec, measure, x) -> np.ndarray:
    """(K * mu)(x): exact sum over points, or cell-midpoint quadrature.

    ``measure`` is an :class:`EmpiricalMeasure` or :class:`GridDensity`;
    ``x`` is a single point or an (m, 2) batch.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if kernel.family == "zero" or kernel.amplitude == 0.0:
        out = np.zeros_like(pts)
        return out[0] if single else out
    if isinstance(measure, EmpiricalMeasure):
        src, w = measure.points, None
    else:
        src = measure.center_points()
        w = (measure.values * measure.cell_area).ravel()
    diff = pts[:, None, :] - src[None, :, :]
    vals = eval_kernel(kernel, diff)  # (m, n, 2)
    out = np.mean(vals, axis=1) if w is None else np.tensordot(vals, w, ([1], [0]))
    return out[0] if single else out


def convolve_danger(danger: DangerKernelSpec, measure, x) -> np.ndarray:
    """(H * mu)(x) for the scalar danger kernel."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x[None, :] if single else x
    if isinstance(measure, EmpiricalMeasure):
        src, w = measure.points, None
    else:
        src = measure.center_points()
        w = (measure.values * measure.cell_area).ravel()
    diff = pts[:, None, :] - src[None, :, :]
    vals = eval_danger(danger, diff)  # (m, n)
    out = np.mean(vals, axis=1) if w is None else vals @ w
    return float(out[0]) if single else out


def grid_sample(g: GridDensity, n: int,
                gen: np.random.Generator) -> EmpiricalMeasure:
    """n i.i.d. draws from a grid density: cell by mass, uniform within."""
    if n < 1:
        raise ValueError("n must be >= 1")
    masses = (g.values * g.cell_area).ravel()
    total = masses.sum()
    if total <= 0:
        raise ValueError("grid density has no mass to sample")
    cum = np.cumsum(masses / total)
    cum[-1] = 1.0
    idx = np.searchsorted(cum, uniform01(gen, n), side="right")
    ix, iy = np.unravel_index(idx, (g.nx, g.ny))
    x0, _, y0, _ = g.domain
    off = uniform01(gen, (n, 2))
    pts = np.column_stack((
        x0 + (ix + off[:, 0]) * g.dx,
        y0 + (iy + off[:, 1]) * g.dy,
    ))
    return EmpiricalMeasure(pts)
