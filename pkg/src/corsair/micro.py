"""Microscopic simulator for the commercial / pirate / guard system.

Time stepping is Euler-Maruyama: explicit Euler on all drifts plus
sqrt(2 kappa) * dW on each pirate. The dispersion is constant, so the scheme
is strong order 1 here and drift accuracy dominates.

Reductions over the pirate axis (the commercial drift average and the
contact rate) are summed in sorted order, which makes them independent of
pirate labeling: permuting pirate indices together with their stream keys
permutes trajectories bit-exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import (ModelConfig, eval_danger, eval_eta, eval_kernel,
                     eval_route, eval_velocity, lipschitz_constants)
from .controls import PiecewiseConstantControl
from .errors import IntegrationDivergedError
from .rng import ALGORITHM_ID, EntityClass, StreamKey, standard_normal, stream
from .rng import sample_initial

DT_STIFFNESS_MARGIN = 0.1


@dataclass(frozen=True)
class SystemState:
    """Positions of every ship at one time node."""

    t: float
    X: np.ndarray  # (N, 2) commercial
    Y: np.ndarray  # (M, 2) pirate
    Z: np.ndarray  # (L, 2) guard


@dataclass
class TrajectoryBundle:
    """Uniform-grid trajectories of one run, immutable after construction."""

    dt: float
    times: np.ndarray          # (K+1,)
    X: np.ndarray              # (K+1, N, 2)
    Y: np.ndarray              # (K+1, M, 2)
    Z: np.ndarray              # (K+1, L, 2)
    master_seed: int
    replication: int = 0
    algorithm: str = ALGORITHM_ID
    warnings: list = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    def state(self, k: int) -> SystemState:
        return SystemState(t=float(self.times[k]), X=self.X[k],
                           Y=self.Y[k], Z=self.Z[k])


def _permsum(a: np.ndarray, axis: int) -> np.ndarray:
    """Sum along ``axis`` in sorted order (invariant to permutations)."""
    return np.sum(np.sort(a, axis=axis), axis=axis)


# ---------------------------------------------------------------------------
# Drift fields (vectorized; shared with the mean-field solvers)


def congestion_density(X: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Per-ship crowding density (1/(N-1)) sum_n' eta(X_n, X_n - X_n').

    The self term vanishes because eta(x, 0) = 0; a single ship sees
    density 0 by convention.
    """
    n = X.shape[0]
    if n < 2:
        return np.zeros(n)
    diff = X[:, None, :] - X[None, :, :]
    vals = eval_eta(cfg.congestion, X[:, None, :], diff, route=cfg.route)
    return vals.sum(axis=1) / (n - 1)


def commercial_drift(X: np.ndarray, pirate_points: np.ndarray,
                     cfg: ModelConfig) -> np.ndarray:
    """Congested route-following plus the averaged pirate push.

    ``pirate_points`` may be the micro pirate positions or an ensemble
    approximating the pirate law; the drift is its empirical average.
    """
    speed = eval_velocity(cfg.congestion, congestion_density(X, cfg))
    push = np.zeros_like(X)
    if pirate_points.shape[0] and cfg.kernel_cp.amplitude > 0 \
            and cfg.kernel_cp.family != "zero":
        diff = X[:, None, :] - pirate_points[None, :, :]
        push = _permsum(eval_kernel(cfg.kernel_cp, diff), axis=1) \
            / pirate_points.shape[0]
    return speed[:, None] * (eval_route(cfg.route, X) + push)


def pirate_drift(Y: np.ndarray, commercial_points: np.ndarray,
                 Z: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Guard repulsion minus attraction toward commercial ships."""
    out = np.zeros_like(Y)
    if Z.shape[0]:
        diff = Y[:, None, :] - Z[None, :, :]
        out = out + eval_kernel(cfg.kernel_pg, diff).mean(axis=1)
    if commercial_points.shape[0]:
        diff = Y[:, None, :] - commercial_points[None, :, :]
        out = out - eval_kernel(cfg.kernel_pc, diff).mean(axis=1)
    return out


def guard_drift(Z: np.ndarray, u_t: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """Mutual guard repulsion plus the control; the self term K(0) = 0."""
    diff = Z[:, None, :] - Z[None, :, :]
    return eval_kernel(cfg.kernel_gg, diff).mean(axis=1) + u_t


# Per-index contract surface.

def drift_commercial(n: int, state: SystemState, cfg: ModelConfig) -> np.ndarray:
    return commercial_drift(state.X, state.Y, cfg)[n]


def drift_pirate(m: int, state: SystemState, cfg: ModelConfig) -> np.ndarray:
    return pirate_drift(state.Y, state.X, state.Z, cfg)[m]


def drift_guard(ell: int, state: SystemState, u_t: np.ndarray,
                cfg: ModelConfig) -> np.ndarray:
    return guard_drift(state.Z, np.asarray(u_t, dtype=np.float64), cfg)[ell]


def contact_rate(state: SystemState, cfg: ModelConfig) -> float:
    """Average danger-kernel weight over all commercial-pirate pairs."""
    diff = state.X[:, None, :] - state.Y[None, :, :]
    vals = eval_danger(cfg.danger, diff)  # (N, M)
    return float(_permsum(vals.ravel(), axis=0) / vals.size)


# ---------------------------------------------------------------------------
# Stepping


def _check_finite(t, **arrays):
    for what, arr in arrays.items():
        if not np.all(np.isfinite(arr)):
            raise IntegrationDivergedError(t, what)


def step(state: SystemState, dt: float, u_t: np.ndarray,
         pirate_noise: np.ndarray, cfg: ModelConfig) -> SystemState:
    """One Euler-Maruyama step.

    ``u_t`` is the control value on the current cell (left endpoint);
    ``pirate_noise`` holds the Brownian increments dW ~ N(0, dt Id) per
    pirate, scaled here by sqrt(2 kappa).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    X = state.X + dt * commercial_drift(state.X, state.Y, cfg)
    Y = state.Y + dt * pirate_drift(state.Y, state.X, state.Z, cfg) \
        + np.sqrt(2.0 * cfg.kappa) * pirate_noise
    Z = state.Z + dt * guard_drift(state.Z, np.asarray(u_t), cfg)
    t = state.t + dt
    _check_finite(t, commercial=X, pirate=Y, guard=Z)
    return SystemState(t=t, X=X, Y=Y, Z=Z)


def resolve_steps(cfg: ModelConfig, control: PiecewiseConstantControl,
                  dt: float | None = None):
    """Time step and step count; dt must tile both [0, T] and the control."""
    dt = cfg.dt if dt is None else float(dt)
    n_steps = int(round(cfg.horizon / dt))
    if n_steps < 1 or abs(n_steps * dt - cfg.horizon) > 1e-9 * cfg.horizon:
        raise ValueError(f"dt={dt!r} does not divide the horizon {cfg.horizon!r}")
    control.steps_per_cell(dt)
    return dt, n_steps


def pirate_initial_positions(cfg: ModelConfig, master_seed: int,
                             replication: int = 0,
                             key_indices=None) -> np.ndarray:
    """i.i.d. initial pirate draws, one independent stream per pirate."""
    idx = range(cfg.n_pirate) if key_indices is None else key_indices
    rows = [sample_initial(cfg.pirate_init,
                           stream(StreamKey(master_seed, EntityClass.PIRATE_INIT,
                                            int(i), replication)))
            for i in idx]
    return np.asarray(rows, dtype=np.float64)


def pirate_noise_paths(n_pirates: int, n_steps: int, dt: float,
                       master_seed: int, replication: int = 0,
                       key_indices=None) -> np.ndarray:
    """Brownian increments (n_pirates, n_steps, 2), one stream per pirate."""
    idx = range(n_pirates) if key_indices is None else key_indices
    out = np.empty((n_pirates, n_steps, 2))
    root = np.sqrt(dt)
    for row, i in enumerate(idx):
        gen = stream(StreamKey(master_seed, EntityClass.PIRATE_BM, int(i),
                               replication))
        out[row] = root * standard_normal(gen, (n_steps, 2))
    return out


def integrate_guards(cfg: ModelConfig, control: PiecewiseConstantControl,
                     dt: float, n_steps: int) -> np.ndarray:
    """Guard trajectory (n_steps+1, L, 2); shared by every solver backend so
    the guard path is bit-identical across micro, averaged, and mean-field
    runs with the same control."""
    Z = np.empty((n_steps + 1, cfg.n_guard, 2))
    Z[0] = cfg.guard_points()
    for k in range(n_steps):
        u_t = control.values[control.cell_of_step(k, dt)]
        Z[k + 1] = Z[k] + dt * guard_drift(Z[k], u_t, cfg)
    _check_finite(n_steps * dt, guard=Z[-1])
    return Z


def simulate(cfg: ModelConfig, control: PiecewiseConstantControl,
             master_seed: int, dt: float | None = None,
             replication: int = 0, pirate_key_indices=None) -> TrajectoryBundle:
    """Integrate the full system on a uniform grid.

    The guard path depends only on (Z0, control, guard kernel) and is
    computed by :func:`integrate_guards`; pirate streams are keyed by pirate
    index so enlarging the fleet never perturbs existing noise.
    """
    dt, n_steps = resolve_steps(cfg, control, dt)
    consts = lipschitz_constants(cfg)
    run_warnings = []
    stiff = consts.max_drift_lipschitz()
    if stiff > 0 and dt > DT_STIFFNESS_MARGIN / stiff:
        msg = (f"dt={dt:.4g} exceeds the stiffness guideline "
               f"{DT_STIFFNESS_MARGIN / stiff:.4g}")
        run_warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    times = np.arange(n_steps + 1) * dt
    X = np.empty((n_steps + 1, cfg.n_commercial, 2))
    Y = np.empty((n_steps + 1, cfg.n_pirate, 2))
    X[0] = cfg.commercial_points()
    Y[0] = pirate_initial_positions(cfg, master_seed, replication,
                                    pirate_key_indices)
    Z = integrate_guards(cfg, control, dt, n_steps)
    noise = pirate_noise_paths(cfg.n_pirate, n_steps, dt, master_seed,
                               replication, pirate_key_indices)
    root2k = np.sqrt(2.0 * cfg.kappa)
    for k in range(n_steps):
        X[k + 1] = X[k] + dt * commercial_drift(X[k], Y[k], cfg)
        Y[k + 1] = Y[k] + dt * pirate_drift(Y[k], X[k], Z[k], cfg) \
            + root2k * noise[:, k, :]
        _check_finite(times[k + 1], commercial=X[k + 1], pirate=Y[k + 1])
    return TrajectoryBundle(dt=dt, times=times, X=X, Y=Y, Z=Z,
                            master_seed=master_seed, replication=replication,
                            warnings=run_warnings)


# ---------------------------------------------------------------------------
# Bundle export

_CLASS_NAMES = ("commercial", "pirate", "guard")


def bundle_to_csv(bundle: TrajectoryBundle, path):
    """Long-format CSV: t, entity_class, index, x, y."""
    with open(path, "w") as f:
        f.write("t,entity_class,index,x,y\n")
        for k, t in enumerate(bundle.times):
            for name, arr in zip(_CLASS_NAMES,
                                 (bundle.X[k], bundle.Y[k], bundle.Z[k])):
                for i, (x, y) in enumerate(arr):
                    f.write(f"{t!r},{name},{i},{x!r},{y!r}\n")


def bundle_to_binary(bundle: TrajectoryBundle, path_bin, path_header):
    """Flat little-endian float64 stream plus a JSON sidecar with shapes."""
    import json

    arrays = [("times", bundle.times), ("commercial", bundle.X),
              ("pirate", bundle.Y), ("guard", bundle.Z)]
    header = {"dtype": "<f8", "dt": bundle.dt,
              "master_seed": bundle.master_seed,
              "replication": bundle.replication,
              "algorithm": bundle.algorithm, "arrays": []}
    offset = 0
    with open(path_bin, "wb") as f:
        for name, arr in arrays:
            data = np.ascontiguousarray(arr, dtype="<f8")
            f.write(data.tobytes())
            header["arrays"].append({"name": name, "shape": list(arr.shape),
                                     "offset": offset})
            offset += data.size
    with open(path_header, "w") as f:
        json.dump(header, f, indent=2, sort_keys=True)
        f.write("\n")
