"""Mean-field solvers.

Two pirate-law backends realize the same object and cross-validate each
other: a Monte Carlo ensemble of representative pirate paths (the law of
samples) and a finite-volume Fokker-Planck grid (donor-cell upwind advection
plus explicit five-point diffusion, conservative with no-flux walls). The
commercial density in the full mean-field system is carried by equal-mass
Lagrangian particles, so its mass and pushforward structure are exact by
construction.

Co-integration (explicit forward coupling) is the production solution mode;
Picard iteration on the pirate path law is provided as a validation mode
with common random numbers across iterations.

Grids live on a truncated box. The box is auto-sized from drift-reach
estimates; the mass in the outermost cell ring is monitored and a run
restarts on a 1.5x larger box whenever it exceeds BOUNDARY_MASS_TOL.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import ndtr

from .config import (ModelConfig, eval_danger, eval_eta, eval_kernel,
                     eval_route, eval_velocity, lipschitz_constants)
from .controls import PiecewiseConstantControl
from .errors import IntegrationDivergedError, StepRejectedError
from .measures import EmpiricalMeasure, GridDensity
from .micro import (commercial_drift, integrate_guards, pirate_drift,
                    pirate_initial_positions, pirate_noise_paths,
                    resolve_steps)

CFL_SAFETY = 0.9
BOUNDARY_MASS_TOL = 1e-8
MAX_DOMAIN_EXPANSIONS = 4
FFT_POINTS_THRESHOLD = 256


@dataclass(frozen=True)
class LawSeries:
    """Time-indexed pirate law: sample paths or grid densities."""

    kind: str                     # "ensemble" | "grid"
    times: np.ndarray             # (K+1,)
    paths: np.ndarray | None = None   # (K+1, n_samples, 2), time-major
    grids: tuple | None = None        # K+1 GridDensity slices

    def __post_init__(self):
        if self.kind not in ("ensemble", "grid"):
            raise ValueError("kind must be 'ensemble' or 'grid'")
        if self.kind == "ensemble":
            if self.paths is None or self.paths.shape[0] != len(self.times):
                raise ValueError("paths must align with the time grid")
        else:
            if self.grids is None or len(self.grids) != len(self.times):
                raise ValueError("grids must align with the time grid")

    def ensemble_at(self, k: int) -> np.ndarray:
        return self.paths[k]

    def grid_at(self, k: int) -> GridDensity:
        return self.grids[k]


# ---------------------------------------------------------------------------
# Grids


@dataclass(frozen=True)
class GridSpec:
    nx: int
    ny: int
    halfwidth: float

    @property
    def domain(self):
        h = self.halfwidth
        return (-h, h, -h, h)

    def expanded(self, factor=1.5) -> "GridSpec":
        return GridSpec(self.nx, self.ny, self.halfwidth * factor)


def auto_grid(cfg: ModelConfig) -> GridSpec:
    """Default grid: drift-reach radii plus a six-sigma Brownian margin.

    Reach estimates are linear in T (route magnitude taken near the lane);
    the boundary-mass monitor catches any underestimate and triggers an
    expansion, so these are sizing heuristics, not correctness bounds.
    """
    num = cfg.numerics
    if num.grid_halfwidth is not None:
        return GridSpec(num.grid_nx, num.grid_ny, num.grid_halfwidth)
    consts = lipschitz_constants(cfg)
    T = cfg.horizon
    x0 = cfg.commercial_points()
    r_x = float(np.max(np.hypot(x0[:, 0], x0[:, 1]))) \
        + cfg.congestion.v_max * (1.0 + consts.kernel_sup["cp"]) * T
    r_y = consts.radius_pirate
    z0 = cfg.guard_points()
    r_z = float(np.max(np.hypot(z0[:, 0], z0[:, 1]))) + consts.guard_speed * T
    half = 1.5 * max(r_x, r_y, r_z) + 6.0 * consts.brownian_spread
    return GridSpec(num.grid_nx, num.grid_ny, half)


def initial_pirate_grid(cfg: ModelConfig, spec: GridSpec) -> GridDensity:
    """Cell-averaged initial pirate density on the grid.

    Point masses occupy a single cell; Gaussian laws use exact separable
    cell integrals; disk laws use a 4x4 subcell indicator average. The
    result is renormalized to unit mass.
    """
    dist = cfg.pirate_init
    g = GridDensity(spec.domain, spec.nx, spec.ny,
                    np.zeros((spec.nx, spec.ny)))
    xs, ys = g.cell_centers()
    cx, cy = dist.center
    if dist.family == "point":
        ix = int(np.clip(np.searchsorted(xs, cx), 0, spec.nx - 1))
        iy = int(np.clip(np.searchsorted(ys, cy), 0, spec.ny - 1))
        vals = np.zeros((spec.nx, spec.ny))
        vals[ix, iy] = 1.0 / g.cell_area
        return GridDensity(spec.domain, spec.nx, spec.ny, vals)
    if dist.family == "gaussian":
        ex = np.linspace(spec.domain[0], spec.domain[1], spec.nx + 1)
        ey = np.linspace(spec.domain[2], spec.domain[3], spec.ny + 1)
        px = np.diff(ndtr((ex - cx) / dist.scale))
        py = np.diff(ndtr((ey - cy) / dist.scale))
        vals = np.outer(px, py)
    else:  # disk
        sub = (np.arange(4) + 0.5) / 4.0
        vals = np.zeros((spec.nx, spec.ny))
        for ox in sub:
            for oy in sub:
                qx = spec.domain[0] + (np.arange(spec.nx) + ox) * g.dx
                qy = spec.domain[2] + (np.arange(spec.ny) + oy) * g.dy
                inside = ((qx[:, None] - cx) ** 2 + (qy[None, :] - cy) ** 2
                          <= dist.radius ** 2)
                vals += inside / 16.0
    total = vals.sum()
    if total <= 0:
        raise ValueError("initial pirate law has no mass inside the grid")
    return GridDensity(spec.domain, spec.nx, spec.ny,
                       vals / (total * g.cell_area))


def boundary_ring_mass(g: GridDensity) -> float:
    v = g.values
    ring = v[0, :].sum() + v[-1, :].sum() + v[1:-1, 0].sum() + v[1:-1, -1].sum()
    return float(ring) * g.cell_area


# ---------------------------------------------------------------------------
# Fokker-Planck finite-volume step


def fp_stability_rate(g: GridDensity, drift: np.ndarray, kappa: float) -> float:
    """Inverse of the largest stable dt for the explicit scheme."""
    bx = float(np.max(np.abs(drift[..., 0]))) if drift.size else 0.0
    by = float(np.max(np.abs(drift[..., 1]))) if drift.size else 0.0
    return bx / g.dx + by / g.dy + 2.0 * kappa * (1.0 / g.dx ** 2 + 1.0 / g.dy ** 2)


def fokker_planck_step(g: GridDensity, drift: np.ndarray, kappa: float,
                       dt: float) -> GridDensity:
    """One conservative finite-volume step with no-flux walls.

    Donor-cell upwinding on face-averaged drifts plus explicit five-point
    diffusion. The step is rejected unless dt times the combined advection
    and diffusion rate stays below CFL_SAFETY, which also guarantees
    nonnegativity; this is stricter than per-mechanism CFL limits.
    """
    if drift.shape != (g.nx, g.ny, 2):
        raise ValueError(f"drift shape {drift.shape} != ({g.nx}, {g.ny}, 2)")
    rate = fp_stability_rate(g, drift, kappa)
    if rate > 0 and dt * rate > CFL_SAFETY * (1.0 + 1e-12):
        raise StepRejectedError(dt, CFL_SAFETY / rate)

    v = g.values
    # x faces (interior): (nx-1, ny)
    bxf = 0.5 * (drift[:-1, :, 0] + drift[1:, :, 0])
    fx = np.maximum(bxf, 0.0) * v[:-1, :] + np.minimum(bxf, 0.0) * v[1:, :]
    fx -= kappa * (v[1:, :] - v[:-1, :]) / g.dx
    # y faces (interior): (nx, ny-1)
    byf = 0.5 * (drift[:, :-1, 1] + drift[:, 1:, 1])
    fy = np.maximum(byf, 0.0) * v[:, :-1] + np.minimum(byf, 0.0) * v[:, 1:]
    fy -= kappa * (v[:, 1:] - v[:, :-1]) / g.dy

    out = v.copy()
    out[:-1, :] -= (dt / g.dx) * fx
    out[1:, :] += (dt / g.dx) * fx
    out[:, :-1] -= (dt / g.dy) * fy
    out[:, 1:] += (dt / g.dy) * fy
    return GridDensity(g.domain, g.nx, g.ny, out)


def fp_substeps(g: GridDensity, drift: np.ndarray, kappa: float,
                dt_macro: float) -> GridDensity:
    """Advance one macro step, subdividing to honor the stability bound."""
    rate = fp_stability_rate(g, drift, kappa)
    nsub = max(1, int(math.ceil(dt_macro * rate / CFL_SAFETY)))
    dt = dt_macro / nsub
    for _ in range(nsub):
        g = fokker_planck_step(g, drift, kappa, dt)
    return g


# ---------------------------------------------------------------------------
# Gridded kernel fields (FFT fast paths) and particle binning


def _offset_samples(grid: GridDensity, fn) -> np.ndarray:
    """Sample fn on the (2nx-1, 2ny-1) lattice of cell-center offsets."""
    ox = (np.arange(2 * grid.nx - 1) - (grid.nx - 1)) * grid.dx
    oy = (np.arange(2 * grid.ny - 1) - (grid.ny - 1)) * grid.dy
    w = np.stack(np.meshgrid(ox, oy, indexing="ij"), axis=-1)
    return fn(w)


def _grid_convolve(mass: np.ndarray, samples: np.ndarray,
                   nx: int, ny: int) -> np.ndarray:
    full = fftconvolve(mass, samples, mode="full")
    return full[nx - 1:2 * nx - 1, ny - 1:2 * ny - 1]


def kernel_field_from_grid(kernel, grid: GridDensity) -> np.ndarray:
    """(K * grid) at every cell center, shape (nx, ny, 2)."""
    if kernel.family == "zero" or kernel.amplitude == 0.0:
        return np.zeros((grid.nx, grid.ny, 2))
    mass = grid.values * grid.cell_area
    samples = _offset_samples(grid, lambda w: eval_kernel(kernel, w))
    out = np.empty((grid.nx, grid.ny, 2))
    for c in range(2):
        out[..., c] = _grid_convolve(mass, samples[..., c], grid.nx, grid.ny)
    return out


def danger_field_from_grid(danger, grid: GridDensity) -> np.ndarray:
    """(H * grid) at every cell center, shape (nx, ny)."""
    if danger.amplitude == 0.0:
        return np.zeros((grid.nx, grid.ny))
    mass = grid.values * grid.cell_area
    samples = _offset_samples(grid, lambda w: eval_danger(danger, w))
    return _grid_convolve(mass, samples, grid.nx, grid.ny)


def eta_field_from_grid(congestion, grid: GridDensity) -> np.ndarray:
    """Isotropic crowding kernel convolved with a gridded density."""
    mass = grid.values * grid.cell_area
    samples = _offset_samples(
        grid, lambda w: eval_eta(congestion, np.zeros(2), w))
    return _grid_convolve(mass, samples, grid.nx, grid.ny)


def bin_points(points: np.ndarray, spec_like: GridDensity) -> GridDensity:
    """Cloud-in-cell binning of equal-mass points onto the grid."""
    n = points.shape[0]
    x0, _, y0, _ = spec_like.domain
    nx, ny = spec_like.nx, spec_like.ny
    fx = (points[:, 0] - x0) / spec_like.dx - 0.5
    fy = (points[:, 1] - y0) / spec_like.dy - 0.5
    ix = np.clip(np.floor(fx).astype(int), 0, nx - 2)
    iy = np.clip(np.floor(fy).astype(int), 0, ny - 2)
    wx = np.clip(fx - ix, 0.0, 1.0)
    wy = np.clip(fy - iy, 0.0, 1.0)
    vals = np.zeros((nx, ny))
    w = 1.0 / (n * spec_like.cell_area)
    np.add.at(vals, (ix, iy), (1 - wx) * (1 - wy) * w)
    np.add.at(vals, (ix + 1, iy), wx * (1 - wy) * w)
    np.add.at(vals, (ix, iy + 1), (1 - wx) * wy * w)
    np.add.at(vals, (ix + 1, iy + 1), wx * wy * w)
    return GridDensity(spec_like.domain, nx, ny, vals)


def bilinear(field: np.ndarray, grid: GridDensity,
             points: np.ndarray) -> np.ndarray:
    """Sample a cell-center field at arbitrary points."""
    x0, _, y0, _ = grid.domain
    fx = np.clip((points[:, 0] - x0) / grid.dx - 0.5, 0.0, grid.nx - 1.0)
    fy = np.clip((points[:, 1] - y0) / grid.dy - 0.5, 0.0, grid.ny - 1.0)
    ix = np.minimum(fx.astype(int), grid.nx - 2)
    iy = np.minimum(fy.astype(int), grid.ny - 2)
    wx = (fx - ix)[:, None] if field.ndim == 3 else fx - ix
    wy = (fy - iy)[:, None] if field.ndim == 3 else fy - iy
    f00 = field[ix, iy]
    f10 = field[ix + 1, iy]
    f01 = field[ix, iy + 1]
    f11 = field[ix + 1, iy + 1]
    return ((1 - wx) * (1 - wy) * f00 + wx * (1 - wy) * f10
            + (1 - wx) * wy * f01 + wx * wy * f11)


def kernel_field_from_points(kernel, grid: GridDensity,
                             points: np.ndarray) -> np.ndarray:
    """mean_n K(c - p_n) at every cell center.

    Direct summation for small clouds; CIC binning plus FFT beyond
    FFT_POINTS_THRESHOLD points.
    """
    if kernel.family == "zero" or kernel.amplitude == 0.0 or not points.size:
        return np.zeros((grid.nx, grid.ny, 2))
    if points.shape[0] <= FFT_POINTS_THRESHOLD:
        centers = grid.center_points()
        diff = centers[:, None, :] - points[None, :, :]
        vals = eval_kernel(kernel, diff).mean(axis=1)
        return vals.reshape(grid.nx, grid.ny, 2)
    return kernel_field_from_grid(kernel, bin_points(points, grid))


# ---------------------------------------------------------------------------
# Pirate drift field


def pirate_drift_field(grid: GridDensity, Z_t: np.ndarray, commercial,
                       cfg: ModelConfig) -> np.ndarray:
    """Drift of the pirate law at cell centers: guard repulsion minus the
    pull of the commercial measure (ship positions or particle cloud)."""
    pts = commercial.points if isinstance(commercial, EmpiricalMeasure) \
        else np.asarray(commercial, dtype=np.float64)
    field = np.zeros((grid.nx, grid.ny, 2))
    if Z_t.shape[0] and cfg.kernel_pg.amplitude > 0 \
            and cfg.kernel_pg.family != "zero":
        centers = grid.center_points()
        diff = centers[:, None, :] - Z_t[None, :, :]
        field += eval_kernel(cfg.kernel_pg, diff).mean(axis=1) \
            .reshape(grid.nx, grid.ny, 2)
    field -= kernel_field_from_points(cfg.kernel_pc, grid, pts)
    return field


# ---------------------------------------------------------------------------
# Averaged model (single representative pirate interacting via its law)


@dataclass
class AveragedResult:
    dt: float
    times: np.ndarray
    X: np.ndarray          # (K+1, N, 2) commercial ships
    ensemble: np.ndarray   # (K+1, n_samples, 2) pirate law samples
    Z: np.ndarray          # (K+1, L, 2)
    master_seed: int
    replication: int

    def law(self) -> LawSeries:
        return LawSeries("ensemble", self.times, paths=self.ensemble)


def simulate_averaged(cfg: ModelConfig, control: PiecewiseConstantControl,
                      n_samples: int, master_seed: int,
                      dt: float | None = None,
                      replication: int = 0) -> AveragedResult:
    """Co-integrate the averaged system with a Monte Carlo law.

    ``n_samples`` i.i.d. representative pirates approximate the law; the
    commercial drift averages the kernel over the ensemble. Sample k uses
    the same stream keys as pirate k of the microscopic run, so the two
    systems can share Brownian paths in coupling experiments.
    """
    dt, n_steps = resolve_steps(cfg, control, dt)
    times = np.arange(n_steps + 1) * dt
    Z = integrate_guards(cfg, control, dt, n_steps)
    X = np.empty((n_steps + 1, cfg.n_commercial, 2))
    ens = np.empty((n_steps + 1, n_samples, 2))
    X[0] = cfg.commercial_points()
    saved_m = cfg.n_pirate
    ens[0] = _ensemble_initial(cfg, n_samples, master_seed, replication)
    noise = pirate_noise_paths(n_samples, n_steps, dt, master_seed, replication)
    root2k = np.sqrt(2.0 * cfg.kappa)
    for k in range(n_steps):
        X[k + 1] = X[k] + dt * commercial_drift(X[k], ens[k], cfg)
        ens[k + 1] = ens[k] + dt * pirate_drift(ens[k], X[k], Z[k], cfg) \
            + root2k * noise[:, k, :]
        if not (np.all(np.isfinite(X[k + 1])) and np.all(np.isfinite(ens[k + 1]))):
            raise IntegrationDivergedError(times[k + 1], "averaged system")
    del saved_m
    return AveragedResult(dt=dt, times=times, X=X, ensemble=ens, Z=Z,
                          master_seed=master_seed, replication=replication)


def _ensemble_initial(cfg: ModelConfig, n_samples: int, master_seed: int,
                      replication: int) -> np.ndarray:
    from .rng import EntityClass, StreamKey, sample_initial, stream
    rows = [sample_initial(cfg.pirate_init,
                           stream(StreamKey(master_seed,
                                            EntityClass.PIRATE_INIT, k,
                                            replication)))
            for k in range(n_samples)]
    return np.asarray(rows, dtype=np.float64)


@dataclass
class AveragedGridResult:
    dt: float
    times: np.ndarray
    X: np.ndarray
    grids: tuple
    Z: np.ndarray
    grid_spec: GridSpec

    def law(self) -> LawSeries:
        return LawSeries("grid", self.times, grids=self.grids)


def simulate_averaged_grid(cfg: ModelConfig, control: PiecewiseConstantControl,
                           grid_spec: GridSpec | None = None,
                           dt: float | None = None) -> AveragedGridResult:
    """Averaged system with the pirate law carried by the Fokker-Planck grid.

    Deterministic: the initial law enters as cell averages, never as samples.
    """
    spec = grid_spec or auto_grid(cfg)
    for attempt in range(MAX_DOMAIN_EXPANSIONS + 1):
        try:
            return _averaged_grid_once(cfg, control, spec, dt)
        except _DomainOverflow:
            spec = spec.expanded()
    raise IntegrationDivergedError(cfg.horizon, "pirate mass at grid boundary")


class _DomainOverflow(Exception):
    pass


def _require_inside(points: np.ndarray, domain, t: float):
    x0, x1, y0, y1 = domain
    if points.size and (points[:, 0].min() < x0 or points[:, 0].max() > x1
                        or points[:, 1].min() < y0 or points[:, 1].max() > y1):
        raise _DomainOverflow


def _averaged_grid_once(cfg, control, spec: GridSpec, dt):
    dt, n_steps = resolve_steps(cfg, control, dt)
    times = np.arange(n_steps + 1) * dt
    Z = integrate_guards(cfg, control, dt, n_steps)
    X = np.empty((n_steps + 1, cfg.n_commercial, 2))
    X[0] = cfg.commercial_points()
    grid = initial_pirate_grid(cfg, spec)
    grids = [grid]
    for k in range(n_steps):
        field = pirate_drift_field(grid, Z[k], X[k], cfg)
        cp_at_ships = _kernel_from_grid_at(cfg.kernel_cp, grid, X[k])
        X[k + 1] = X[k] + dt * _commercial_velocity(X[k], cp_at_ships, cfg)
        if not np.all(np.isfinite(X[k + 1])):
            raise IntegrationDivergedError(times[k + 1], "commercial")
        _require_inside(X[k + 1], spec.domain, times[k + 1])
        grid = fp_substeps(grid, field, cfg.kappa, dt)
        if boundary_ring_mass(grid) > BOUNDARY_MASS_TOL:
            raise _DomainOverflow
        grids.append(grid)
    return AveragedGridResult(dt=dt, times=times, X=X, grids=tuple(grids),
                              Z=Z, grid_spec=spec)


def _kernel_from_grid_at(kernel, grid: GridDensity, points: np.ndarray):
    """Exact cell-midpoint quadrature of (K * grid) at a few points."""
    if kernel.family == "zero" or kernel.amplitude == 0.0:
        return np.zeros_like(points)
    centers = grid.center_points()
    w = (grid.values * grid.cell_area).ravel()
    diff = points[:, None, :] - centers[None, :, :]
    return np.tensordot(eval_kernel(kernel, diff), w, ([1], [0]))


def _commercial_velocity(X: np.ndarray, cp_pull: np.ndarray,
                         cfg: ModelConfig) -> np.ndarray:
    from .micro import congestion_density
    speed = eval_velocity(cfg.congestion, congestion_density(X, cfg))
    return speed[:, None] * (eval_route(cfg.route, X) + cp_pull)


# ---------------------------------------------------------------------------
# Full mean-field system: transport particles + Fokker-Planck law


@dataclass
class MeanFieldResult:
    dt: float
    times: np.ndarray
    particles: np.ndarray  # (K+1, n_part, 2)
    grids: tuple           # K+1 GridDensity slices
    Z: np.ndarray
    grid_spec: GridSpec

    def law(self) -> LawSeries:
        return LawSeries("grid", self.times, grids=self.grids)

    def commercial_measure(self, k: int) -> EmpiricalMeasure:
        return EmpiricalMeasure(self.particles[k])


def crowding_density_at(points: np.ndarray, cfg: ModelConfig,
                        grid: GridDensity | None = None) -> np.ndarray:
    """(eta *2 empirical)(x_j) for the particle cloud itself.

    Pairwise-exact below the configured size threshold (and always when the
    forward-looking offset is active); gridded via CIC + FFT beyond it.
    Self terms vanish because eta(x, 0) = 0.
    """
    n = points.shape[0]
    pairwise = (n <= cfg.numerics.eta_pairwise_max
                or cfg.congestion.route_offset > 0.0 or grid is None)
    if pairwise:
        out = np.empty(n)
        chunk = max(1, int(2e6 / max(n, 1)))
        for a in range(0, n, chunk):
            b = min(a + chunk, n)
            diff = points[a:b, None, :] - points[None, :, :]
            vals = eval_eta(cfg.congestion, points[a:b, None, :], diff,
                            route=cfg.route)
            out[a:b] = vals.mean(axis=1)
        return out
    field = eta_field_from_grid(cfg.congestion, bin_points(points, grid))
    return bilinear(field, grid, points)


def transport_velocity(points: np.ndarray, pirate_grid: GridDensity,
                       cfg: ModelConfig) -> np.ndarray:
    """Velocity of the commercial flow at the particle positions."""
    dens = crowding_density_at(points, cfg, pirate_grid)
    speed = eval_velocity(cfg.congestion, dens)
    if cfg.kernel_cp.amplitude > 0 and cfg.kernel_cp.family != "zero":
        field = kernel_field_from_grid(cfg.kernel_cp, pirate_grid)
        pull = bilinear(field, pirate_grid, points)
    else:
        pull = np.zeros_like(points)
    return speed[:, None] * (eval_route(cfg.route, points) + pull)


def transport_step(points: np.ndarray, pirate_grid: GridDensity,
                   cfg: ModelConfig, dt: float) -> np.ndarray:
    """Explicit Euler push of the equal-mass commercial particles."""
    out = points + dt * transport_velocity(points, pirate_grid, cfg)
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergedError(float("nan"), "commercial particles")
    return out


def commercial_particles_init(cfg: ModelConfig, n_part: int) -> np.ndarray:
    """Deterministic particle quadrature of the limit commercial law."""
    law_spec = cfg.commercial_init
    if law_spec.family == "points":
        reps = int(math.ceil(n_part / len(law_spec.points)))
        pts = np.tile(np.asarray(law_spec.points, dtype=np.float64),
                      (reps, 1))[:n_part]
        return pts
    return law_spec.generate(n_part)


def simulate_meanfield(cfg: ModelConfig, control: PiecewiseConstantControl,
                       n_part: int | None = None,
                       grid_spec: GridSpec | None = None,
                       dt: float | None = None) -> MeanFieldResult:
    """Co-integrate the limit system: transported commercial particles, the
    pirate Fokker-Planck grid, and the controlled guard flow."""
    n_part = n_part or cfg.numerics.n_particles
    spec = grid_spec or auto_grid(cfg)
    for attempt in range(MAX_DOMAIN_EXPANSIONS + 1):
        try:
            return _meanfield_once(cfg, control, n_part, spec, dt)
        except _DomainOverflow:
            spec = spec.expanded()
    raise IntegrationDivergedError(cfg.horizon, "pirate mass at grid boundary")


def _meanfield_once(cfg, control, n_part, spec: GridSpec, dt):
    dt, n_steps = resolve_steps(cfg, control, dt)
    times = np.arange(n_steps + 1) * dt
    Z = integrate_guards(cfg, control, dt, n_steps)
    parts = np.empty((n_steps + 1, n_part, 2))
    parts[0] = commercial_particles_init(cfg, n_part)
    grid = initial_pirate_grid(cfg, spec)
    grids = [grid]
    for k in range(n_steps):
        field = pirate_drift_field(grid, Z[k], parts[k], cfg)
        vel = transport_velocity(parts[k], grid, cfg)
        parts[k + 1] = parts[k] + dt * vel
        if not np.all(np.isfinite(parts[k + 1])):
            raise IntegrationDivergedError(times[k + 1], "commercial particles")
        _require_inside(parts[k + 1], spec.domain, times[k + 1])
        grid = fp_substeps(grid, field, cfg.kappa, dt)
        if boundary_ring_mass(grid) > BOUNDARY_MASS_TOL:
            raise _DomainOverflow
        grids.append(grid)
    return MeanFieldResult(dt=dt, times=times, particles=parts,
                           grids=tuple(grids), Z=Z, grid_spec=spec)


# ---------------------------------------------------------------------------
# Picard iteration on the pirate path law (validation mode)


def picard_iterate(cfg: ModelConfig, control: PiecewiseConstantControl,
                   law_paths: np.ndarray, master_seed: int,
                   dt: float | None = None,
                   replication: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """One application of the law map with frozen noise.

    Given an input ensemble approximating the pirate path law (time-major,
    (K+1, n_samples, 2)), solve the commercial ODE against that law, then
    drive a fresh pirate ensemble by the resulting commercial paths. The
    Brownian and initial-condition streams are fixed by (master_seed,
    sample index, replication), identical across iterations, so successive
    iterates contract toward the co-integration fixed point.

    Returns (new law ensemble, commercial paths).
    """
    dt, n_steps = resolve_steps(cfg, control, dt)
    if law_paths.shape[0] != n_steps + 1:
        raise ValueError("law ensemble does not match the time grid")
    n_samples = law_paths.shape[1]
    Z = integrate_guards(cfg, control, dt, n_steps)

    X = np.empty((n_steps + 1, cfg.n_commercial, 2))
    X[0] = cfg.commercial_points()
    for k in range(n_steps):
        X[k + 1] = X[k] + dt * commercial_drift(X[k], law_paths[k], cfg)
        if not np.all(np.isfinite(X[k + 1])):
            raise IntegrationDivergedError((k + 1) * dt, "commercial")

    ens = np.empty((n_steps + 1, n_samples, 2))
    ens[0] = _ensemble_initial(cfg, n_samples, master_seed, replication)
    noise = pirate_noise_paths(n_samples, n_steps, dt, master_seed, replication)
    root2k = np.sqrt(2.0 * cfg.kappa)
    for k in range(n_steps):
        ens[k + 1] = ens[k] + dt * pirate_drift(ens[k], X[k], Z[k], cfg) \
            + root2k * noise[:, k, :]
        if not np.all(np.isfinite(ens[k + 1])):
            raise IntegrationDivergedError((k + 1) * dt, "pirate ensemble")
    return ens, X


def picard_validate(cfg: ModelConfig, control: PiecewiseConstantControl,
                    master_seed: int, n_samples: int = 128,
                    n_iters: int = 6, alpha: float | None = None,
                    dt: float | None = None):
    """Run the iteration from a frozen initial guess and measure successive
    path-law distances.

    When ``alpha`` is None, the smallest value from a coarse ladder giving
    an empirically contracting tail (d_{j+1} < d_j for j >= 1) is chosen.
    Returns (alpha, distances, final ensemble).
    """
    from .measures import w1_alpha_paths
    dt, n_steps = resolve_steps(cfg, control, dt)
    times = np.arange(n_steps + 1) * dt
    init = _ensemble_initial(cfg, n_samples, master_seed, 0)
    guess = np.repeat(init[None, :, :], n_steps + 1, axis=0)

    ensembles = [guess]
    for _ in range(n_iters):
        nxt, _x = picard_iterate(cfg, control, ensembles[-1], master_seed,
                                 dt=dt)
        ensembles.append(nxt)

    def dists(a):
        return [w1_alpha_paths(ensembles[j].transpose(1, 0, 2),
                               ensembles[j + 1].transpose(1, 0, 2), times, a)
                for j in range(n_iters)]

    if alpha is not None:
        return alpha, dists(alpha), ensembles[-1]
    chosen, best = None, None
    for a in (0.5, 1.0, 2.0, 4.0, 8.0, 16.0):
        d = dists(a)
        best = (a, d)
        if all(d[j + 1] < d[j] for j in range(1, n_iters - 1)):
            chosen = (a, d)
            break
    a, d = chosen if chosen else best
    return a, d, ensembles[-1]
